"""Closed-form perception-distortion curve for a scalar Gaussian toy problem.

The source is X ~ N(0, 1), the observation Y = X + N with N ~ N(0, sigma_n^2)
independent, and the estimators are linear, Xhat = a * Y.  Then
Xhat ~ N(0, a^2 (1 + sigma_n^2)), the mean square error is a quadratic in
``a`` and the perceptual index is the KL divergence between two centered
normals.  Minimizing the divergence over the ``a`` that satisfy
``MSE(a) <= D`` gives P(D) in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import InfeasibleDistortion, NonPositiveSigma, ZeroA


def _check_sigma(sigma_n: float) -> float:
    sigma_n = float(sigma_n)
    if not sigma_n > 0 or not math.isfinite(sigma_n):
        raise NonPositiveSigma(f"noise level must be positive and finite, got {sigma_n}")
    return sigma_n


@dataclass(frozen=True)
class GaussianSetting:
    """Noise level and the derived landmarks of the curve."""

    sigma_n: float

    def __post_init__(self):
        _check_sigma(self.sigma_n)

    @property
    def gain(self) -> float:
        """1 + sigma_n^2, the variance of Y."""
        return 1.0 + self.sigma_n ** 2

    @property
    def a_mmse(self) -> float:
        return 1.0 / self.gain

    @property
    def a_matched(self) -> float:
        """Slope whose output has unit variance (zero divergence)."""
        return 1.0 / math.sqrt(self.gain)

    @property
    def d_min(self) -> float:
        return self.sigma_n ** 2 / self.gain

    @property
    def d_0(self) -> float:
        """Smallest distortion with perfect perceptual quality."""
        return mse_linear(self.a_matched, self.sigma_n)


def dkl_linear(a: float, sigma_n: float) -> float:
    """KL(p_X || p_Xhat) for Xhat = a Y, i.e. between N(0, 1) and N(0, a^2 (1 + sigma_n^2))."""
    s = 1.0 + _check_sigma(sigma_n) ** 2
    a = float(a)
    if a == 0.0:
        raise ZeroA("a = 0 gives a degenerate output and infinite divergence")
    return math.log(abs(a) * math.sqrt(s)) + 1.0 / (2.0 * a * a * s) - 0.5


def mse_linear(a: float, sigma_n: float) -> float:
    """E[(X - a Y)^2] = 1 + a^2 (1 + sigma_n^2) - 2 a."""
    s = 1.0 + _check_sigma(sigma_n) ** 2
    a = float(a)
    return 1.0 + a * a * s - 2.0 * a


def feasible_interval(D: float, sigma_n: float) -> tuple:
    """Endpoints (a_minus, a_plus) of the slopes with MSE(a) <= D."""
    setting = GaussianSetting(sigma_n)
    s = setting.gain
    D = float(D)
    if D < setting.d_min:
        raise InfeasibleDistortion(f"D={D} is below D_min={setting.d_min}")
    root = math.sqrt(max(D * s - setting.sigma_n ** 2, 0.0))
    return (1.0 - root) / s, (1.0 + root) / s


def perception_distortion_closed_form(D: float, sigma_n: float) -> float:
    """P(D) for linear estimators; zero from D_0 on."""
    setting = GaussianSetting(sigma_n)
    D = float(D)
    if D < setting.d_min:
        raise InfeasibleDistortion(f"D={D} is below D_min={setting.d_min}")
    if D >= setting.d_0:
        return 0.0
    _, a_plus = feasible_interval(D, sigma_n)
    return dkl_linear(a_plus, sigma_n)


def closed_form_slope(D: float, sigma_n: float) -> float:
    """dP/dD; -inf at D_min and 0 on [D_0, inf)."""
    setting = GaussianSetting(sigma_n)
    D = float(D)
    if D < setting.d_min:
        raise InfeasibleDistortion(f"D={D} is below D_min={setting.d_min}")
    if D >= setting.d_0:
        return 0.0
    s = setting.gain
    root = math.sqrt(max(D * s - setting.sigma_n ** 2, 0.0))
    if root == 0.0:
        return -math.inf
    a = (1.0 + root) / s
    dkl_da = 1.0 / a - 1.0 / (a ** 3 * s)
    return dkl_da / (2.0 * root)


def sample_curve(sigma_n: float, d_grid: Iterable[float]) -> list:
    """[(D, P(D))] evaluated pointwise on ``d_grid``."""
    return [(float(D), perception_distortion_closed_form(D, sigma_n)) for D in d_grid]


def linspace_grid(start: float, stop: float, n: int) -> list:
    """``n`` equally spaced distortion levels including both ends."""
    if n < 1:
        raise ValueError("grid needs at least one point")
    if n == 1:
        return [float(start)]
    m = n - 1
    inner = [(start * (m - k) + stop * k) / m for k in range(1, m)]
    return [float(start)] + inner + [float(stop)]  # ends exact, not rounded


def curve_rows(sigma_n: float, d_grid: Sequence[float]) -> list:
    """Rows (lambda, D, P, gap) in the tradeoff CSV layout.

    The multiplier of a point is the negative slope of P there.  Closed-form
    points carry no optimization gap.
    """
    return [(0.0 - closed_form_slope(D, sigma_n), D, P, 0.0) for D, P in sample_curve(sigma_n, d_grid)]


def gaussian_csv(sigma_n: float, d_grid: Sequence[float]) -> str:
    from .tradeoff import fmt

    lines = ["lambda,distortion,perception,gap"]
    for lam, D, P, gap in curve_rows(sigma_n, d_grid):
        lines.append(",".join(fmt(v) for v in (lam, D, P, gap)))
    return "\n".join(lines) + "\n"


__all__ = ["GaussianSetting", "dkl_linear", "mse_linear", "feasible_interval",
           "perception_distortion_closed_form", "closed_form_slope", "sample_curve",
           "linspace_grid", "curve_rows", "gaussian_csv"]
