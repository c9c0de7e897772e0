"""Canonical estimators and the distribution-preservation machinery.

Covers the MMSE, MAP, posterior-sampling and random-draw rules, the
analytic MMSE output density of the trinary example, the optimal-support
sets ``S_min(y)``, feasibility of a distribution-preserving optimal
estimator, the marginal-perturbation probe for unique optima, and the
construction of two optimal estimators with different output laws.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .bounds import plan_to_kernel, solve_transport
from .divergence import tv
from .errors import (
    AlphabetMismatch,
    InvertibleDegradation,
    MissingValues,
    NonMonotoneRegion,
    NotApplicable,
)
from .model import (
    Alphabet,
    ConditionalKernel,
    DegradationModel,
    DistortionMeasure,
    Estimator,
    conditional_cost,
    deterministic_estimator,
    posterior_table,
)

MERGE_TOL = 1e-12


def _merge_points(points: np.ndarray, tol: float = MERGE_TOL):
    """Group rows of ``points`` that agree within ``tol``; returns (unique, index)."""
    order = np.lexsort(points.T[::-1])
    uniq: list = []
    index = np.empty(len(points), dtype=int)
    for i in order:
        if uniq and np.max(np.abs(points[i] - uniq[-1])) <= tol:
            index[i] = len(uniq) - 1
        else:
            uniq.append(points[i])
            index[i] = len(uniq) - 1
    return np.array(uniq), index


def mmse_estimator(model: DegradationModel) -> Estimator:
    """Posterior mean; outputs are the distinct means (merged within 1e-12)."""
    xv = model.x_alphabet.values
    if xv is None:
        raise MissingValues("MMSE needs numeric X values")
    means = posterior_table(model) @ xv
    uniq, index = _merge_points(means)
    outputs = Alphabet.from_values(uniq[:, 0] if uniq.shape[1] == 1 else uniq)
    return deterministic_estimator(model.y_alphabet, outputs, index, name="mmse",
                                   info={"means": means})


def map_estimator(model: DegradationModel, tie_tol: float = 0.0) -> Estimator:
    """Posterior mode; ties resolve to the lowest label index and are reported."""
    post = posterior_table(model)
    choice = post.argmax(axis=1)
    top = post[np.arange(post.shape[0]), choice]
    n_top = (post >= top[:, None] - tie_tol).sum(axis=1)
    tied = np.flatnonzero((n_top > 1) & model.support_mask())
    ties = [model.y_alphabet.labels[i] for i in tied]
    return deterministic_estimator(model.y_alphabet, model.x_alphabet, choice, name="map",
                                   info={"ties": ties, "tie_index": tied.tolist()})


def posterior_sampling_estimator(model: DegradationModel) -> Estimator:
    kernel = ConditionalKernel(model.y_alphabet, model.x_alphabet, posterior_table(model))
    return Estimator(kernel, "posterior_sampling")


def random_draw_estimator(model: DegradationModel) -> Estimator:
    table = np.tile(model.prior.weights, (len(model.y_alphabet), 1))
    return Estimator(ConditionalKernel(model.y_alphabet, model.x_alphabet, table), "random_draw")


# --- trinary example: density of the MMSE estimate --------------------------

def _trinary_log_terms(y, p1, p0, sigma):
    xs = np.array([-1.0, 0.0, 1.0])
    logp = np.log(np.array([p1, p0, p1]))
    y = np.asarray(y, dtype=float)[..., None]
    return xs, logp - 0.5 * ((y - xs) / sigma) ** 2


def trinary_mmse(y, p1: float, p0: float, sigma: float = 1.0) -> np.ndarray:
    xs, lt = _trinary_log_terms(y, p1, p0, sigma)
    w = np.exp(lt - logsumexp(lt, axis=-1, keepdims=True))
    return w @ xs


def trinary_p_y(y, p1: float, p0: float, sigma: float = 1.0) -> np.ndarray:
    xs, lt = _trinary_log_terms(y, p1, p0, sigma)
    return np.exp(logsumexp(lt, axis=-1)) / (sigma * np.sqrt(2 * np.pi))


def _invert_increasing(fn, target: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Vectorized bisection for ``fn(y) = target`` with ``fn`` increasing."""
    lo = np.full(target.shape, -1.0)
    hi = np.full(target.shape, 1.0)
    for _ in range(200):
        low = fn(lo) > target
        if not low.any():
            break
        lo[low] *= 2.0
    for _ in range(200):
        high = fn(hi) < target
        if not high.any():
            break
        hi[high] *= 2.0
    while np.max(hi - lo, initial=0.0) > tol:
        mid = 0.5 * (lo + hi)
        below = fn(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def trinary_mmse_density(p1: float, p0: float, xhat, sigma: float = 1.0,
                         h: float = 1e-5, y_tol: float = 1e-10) -> np.ndarray:
    """Density of the MMSE estimate for X in {-1, 0, 1}, Y = X + N(0, sigma^2).

    Change of variables ``p_Y(y*) / |dxhat/dy (y*)|`` with ``y*`` found by
    bisection (to ``y_tol``) and the derivative by a central difference of
    step ``h``.  Points outside (-1, 1) have density 0.
    """
    if not (p1 > 0 and p0 >= 0 and abs(2 * p1 + p0 - 1) <= 1e-9):
        raise ValueError("need p1 > 0, p0 >= 0 and 2 p1 + p0 = 1")
    xhat = np.atleast_1d(np.asarray(xhat, dtype=float))
    out = np.zeros_like(xhat)
    inside = (xhat > -1.0) & (xhat < 1.0)
    if not inside.any():
        return out

    def fn(y):
        return trinary_mmse(y, p1, p0, sigma)

    y = _invert_increasing(fn, xhat[inside], y_tol)
    slope = (fn(y + h) - fn(y - h)) / (2 * h)
    if not np.all(slope > 0):
        bad = y[~(slope > 0)][0]
        raise NonMonotoneRegion(f"MMSE map not increasing near y={bad:.6g}")
    out[inside] = trinary_p_y(y, p1, p0, sigma) / slope
    return out


# --- optimal supports and preservation ---------------------------------------

def optimal_support(model: DegradationModel, dist: DistortionMeasure,
                    tol: float = 1e-9) -> np.ndarray:
    """Boolean ``[y, xhat]`` mask of S_min(y) = {f <= min f + tol}."""
    f = conditional_cost(model, dist)
    return f <= f.min(axis=1, keepdims=True) + tol


@dataclass(frozen=True, eq=False)
class PreservationReport:
    is_preserving_possible: bool
    support: np.ndarray
    witness: Optional[Estimator] = None
    certificate: dict = field(default_factory=dict)

    def support_sets(self, model: DegradationModel) -> dict:
        labels = model.y_alphabet.labels
        return {labels[i]: [j for j in np.flatnonzero(row)] for i, row in enumerate(self.support)}


def preservation_check(model: DegradationModel, dist: DistortionMeasure,
                       tol: float = 1e-9, feas_tol: float = 1e-12) -> PreservationReport:
    """Is some optimal estimator distribution preserving?

    Transport p_Y onto p_X paying 1 per unit routed outside S_min(y); the
    optimum is 0 exactly when a preserving kernel supported on the minima
    exists.  A positive optimum comes with dual potentials certifying it.
    """
    if dist.xhat_alphabet.labels != model.x_alphabet.labels:
        raise AlphabetMismatch("preservation needs output alphabet = X alphabet")
    mask = optimal_support(model, dist, tol)
    p_y = model.p_y
    penalty = np.where(mask, 0.0, 1.0)
    sol = solve_transport(p_y, model.prior.weights, penalty)
    if sol.cost <= feas_tol:
        fallback = mask / mask.sum(axis=1, keepdims=True)
        plan = np.where(mask, sol.plan, 0.0)
        q = plan_to_kernel(plan, p_y, fallback)
        est = Estimator(ConditionalKernel(model.y_alphabet, model.x_alphabet, q), "preserving_optimum")
        out = p_y @ q
        return PreservationReport(True, mask, est,
                                  {"marginal_error": float(np.abs(out - model.prior.weights).max())})
    cert = {"forbidden_mass": sol.cost, "dual_value": sol.dual_value,
            "source_dual": sol.source_dual, "target_dual": sol.target_dual}
    return PreservationReport(False, mask, None, cert)


def is_invertible(model: DegradationModel, tol: float = 0.0) -> bool:
    """True when every positive-probability observation has a single-point posterior."""
    post = posterior_table(model)[model.support_mask()]
    return bool(np.all((post > tol).sum(axis=1) <= 1))


@dataclass(frozen=True)
class ProbeReport:
    baseline_tv: float
    baseline_breaks: bool
    found: bool
    alpha: Optional[float] = None
    y_label: Optional[str] = None
    tv: float = 0.0
    perturbed_prior: Optional[np.ndarray] = None
    perturbed_output: Optional[np.ndarray] = None
    checked: int = 0

    @property
    def breaks(self) -> bool:
        return self.baseline_breaks or self.found


def _optimal_kernel(model: DegradationModel, dist: DistortionMeasure) -> np.ndarray:
    f = conditional_cost(model, dist)
    q = np.zeros_like(f)
    q[np.arange(f.shape[0]), f.argmin(axis=1)] = 1.0
    return q


def _tv_on_x(model, dist, p_x, p_out):
    if dist.xhat_alphabet.labels == model.x_alphabet.labels:
        return tv(p_x, p_out)
    from .divergence import align
    from .model import DiscreteDistribution
    a, b = align(DiscreteDistribution(model.x_alphabet, p_x),
                 DiscreteDistribution(dist.xhat_alphabet, p_out))
    return tv(a.weights, b.weights)


def stability_probe(model: DegradationModel, dist: DistortionMeasure,
                    alphas: Sequence[float] = (0.9, 0.5, 0.1),
                    threshold: float = 1e-6) -> ProbeReport:
    """Search the point-mass marginal perturbations for a broken p_Xhat = p_X.

    The posterior is held fixed while p_Y moves to
    ``alpha p_Y + (1 - alpha) delta_y``; the implied prior and the marginal of
    the (unchanged) optimal estimator are compared in total variation.
    Candidates are scanned by alpha, then by observation index; the first
    break wins.
    """
    if is_invertible(model):
        raise InvertibleDegradation("every posterior is a point mass; the probe is vacuous")
    if any(not 0 < a <= 1 for a in alphas):
        raise ValueError("alphas must lie in (0, 1]")
    post = posterior_table(model)
    q = _optimal_kernel(model, dist)
    p_y = model.p_y
    base = _tv_on_x(model, dist, model.prior.weights, p_y @ q)
    if base > threshold:
        return ProbeReport(base, True, False)
    checked = 0
    for a in alphas:
        for k in np.flatnonzero(p_y > 0):
            py_t = a * p_y
            py_t[k] += 1 - a
            px_t = py_t @ post
            out_t = py_t @ q
            d = _tv_on_x(model, dist, px_t, out_t)
            checked += 1
            if d > threshold:
                return ProbeReport(base, False, True, float(a), model.y_alphabet.labels[k],
                                   d, px_t, out_t, checked)
    return ProbeReport(base, False, False, checked=checked)


def divergent_optima(model: DegradationModel, dist: DistortionMeasure,
                     tol: float = 1e-9):
    """Two optimal estimators with different output distributions.

    For every positive-probability observation whose minimizer set has two
    or more elements, the set is split into its lowest-index element (S_a)
    and the rest (S_b).  The first estimator puts all mass on S_a, the
    second spreads it uniformly on S_b; elsewhere both use the
    lowest-index minimizer.
    """
    mask = optimal_support(model, dist, tol)
    pos = model.support_mask()
    multi = pos & (mask.sum(axis=1) >= 2)
    if not multi.any():
        raise NotApplicable("every optimal-support set is a singleton")
    first = mask.argmax(axis=1)
    qa = np.zeros(mask.shape)
    qa[np.arange(mask.shape[0]), first] = 1.0
    qb = qa.copy()
    for i in np.flatnonzero(multi):
        rest = mask[i].copy()
        rest[first[i]] = False
        qb[i] = rest / rest.sum()
    out = dist.xhat_alphabet
    ea = Estimator(ConditionalKernel(model.y_alphabet, out, qa), "optimum_a")
    eb = Estimator(ConditionalKernel(model.y_alphabet, out, qb), "optimum_b")
    return ea, eb


__all__ = [
    "mmse_estimator", "map_estimator", "posterior_sampling_estimator",
    "random_draw_estimator", "trinary_mmse", "trinary_p_y", "trinary_mmse_density",
    "optimal_support", "PreservationReport", "preservation_check", "is_invertible",
    "ProbeReport", "stability_probe", "divergent_optima",
]
