"""Finite-alphabet probabilistic objects.

Everything here is an immutable value: distributions over labeled
alphabets, row-stochastic kernels, the degradation model (prior plus
channel), estimators, joints and distortion tables.  Arrays are stored
read-only; inputs that violate an invariant are rejected rather than
repaired.

Kernel tables are indexed ``[input, output]``, so a channel is ``[x, y]``,
a posterior ``[y, x]`` and an estimator ``[y, xhat]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Sequence

import numpy as np
from scipy.special import ndtr

from .errors import (
    AlphabetMismatch,
    GridTooNarrow,
    InvalidAlphabet,
    InvalidDistortion,
    MissingValues,
    NegativeWeight,
    NonPositiveSigma,
    SumNotOne,
)

SUM_TOL = 1e-9


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def format_value(v: float) -> str:
    """Label used for a numeric symbol (shortest exact round-trip repr)."""
    v = float(v)
    if v == 0.0:
        v = 0.0  # drop the sign of -0.0
    return repr(v)


@dataclass(frozen=True, eq=False)
class Alphabet:
    labels: tuple
    values: Optional[np.ndarray] = None

    def __post_init__(self):
        labels = tuple(str(s) for s in self.labels)
        if not labels:
            raise InvalidAlphabet("alphabet must be non-empty")
        if len(set(labels)) != len(labels):
            raise InvalidAlphabet("alphabet labels must be unique")
        object.__setattr__(self, "labels", labels)
        if self.values is not None:
            vals = np.array(self.values, dtype=float)
            if vals.ndim == 1:
                vals = vals[:, None]
            if vals.ndim != 2 or vals.shape[0] != len(labels):
                raise InvalidAlphabet(
                    f"expected {len(labels)} value vectors of a shared dimension, "
                    f"got array of shape {vals.shape}")
            if not np.all(np.isfinite(vals)):
                raise InvalidAlphabet("alphabet values must be finite")
            object.__setattr__(self, "values", _frozen(vals))

    @classmethod
    def from_values(cls, values, labels: Optional[Sequence] = None) -> "Alphabet":
        vals = np.array(values, dtype=float)
        if labels is None:
            if vals.ndim == 1:
                labels = [format_value(v) for v in vals]
            else:
                labels = ["(" + ",".join(format_value(c) for c in row) + ")" for row in vals]
        return cls(tuple(labels), vals)

    def __len__(self) -> int:
        return len(self.labels)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Alphabet):
            return NotImplemented
        if self.labels != other.labels:
            return False
        if (self.values is None) != (other.values is None):
            return False
        return self.values is None or (
            self.values.shape == other.values.shape
            and bool(np.array_equal(self.values, other.values)))

    def __hash__(self) -> int:
        return hash(self.labels)

    @property
    def has_values(self) -> bool:
        return self.values is not None

    @property
    def dim(self) -> int:
        return 0 if self.values is None else self.values.shape[1]

    def require_values(self) -> np.ndarray:
        if self.values is None:
            raise MissingValues("alphabet carries no numeric values")
        return self.values

    def scalar_values(self) -> np.ndarray:
        vals = self.require_values()
        if vals.shape[1] != 1:
            raise MissingValues(f"expected scalar values, got dimension {vals.shape[1]}")
        return vals[:, 0]

    def index(self, label) -> int:
        return self.labels.index(str(label))


def same_labels(a: Alphabet, b: Alphabet, what: str = "alphabets") -> None:
    if a.labels != b.labels:
        raise AlphabetMismatch(f"{what} differ: {a.labels[:4]}... vs {b.labels[:4]}...")


def _check_rows(table: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(table)):
        raise NegativeWeight(f"{what} contains non-finite entries")
    if np.any(table < 0):
        raise NegativeWeight(f"{what} has negative entries (min {table.min():.3g})")
    dev = np.abs(table.sum(axis=-1) - 1.0)
    if np.any(dev > SUM_TOL):
        raise SumNotOne(f"{what} rows must sum to 1 within {SUM_TOL:g} "
                        f"(worst deviation {dev.max():.3g})")


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    alphabet: Alphabet
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.shape[0] != len(self.alphabet):
            raise InvalidAlphabet(
                f"{w.shape} weights for an alphabet of size {len(self.alphabet)}")
        _check_rows(w, "distribution")
        object.__setattr__(self, "weights", _frozen(w))

    def __len__(self) -> int:
        return len(self.alphabet)

    def as_dict(self) -> dict:
        return dict(zip(self.alphabet.labels, self.weights.tolist()))


def validate_distribution(weights, alphabet: Alphabet) -> DiscreteDistribution:
    """Wrap ``weights`` as a distribution over ``alphabet``.

    Raises NegativeWeight or SumNotOne instead of renormalizing.
    """
    return DiscreteDistribution(alphabet, weights)


@dataclass(frozen=True, eq=False)
class ConditionalKernel:
    inputs: Alphabet
    outputs: Alphabet
    table: np.ndarray

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        if t.shape != (len(self.inputs), len(self.outputs)):
            raise InvalidAlphabet(
                f"kernel table shape {t.shape} does not match "
                f"({len(self.inputs)}, {len(self.outputs)})")
        _check_rows(t, "kernel")
        object.__setattr__(self, "table", _frozen(t))

    @property
    def is_deterministic(self) -> bool:
        return bool(np.all(np.isclose(self.table.max(axis=1), 1.0, rtol=0, atol=SUM_TOL)))


@dataclass(frozen=True, eq=False)
class Posterior(ConditionalKernel):
    """p(x|y) restricted to the observations with positive probability.

    ``dropped`` lists the Y labels removed because p_Y(y) = 0.
    """
    dropped: tuple = ()


@dataclass(frozen=True, eq=False)
class DegradationModel:
    prior: DiscreteDistribution
    channel: ConditionalKernel

    def __post_init__(self):
        same_labels(self.prior.alphabet, self.channel.inputs, "prior and channel input alphabets")

    @property
    def x_alphabet(self) -> Alphabet:
        return self.prior.alphabet

    @property
    def y_alphabet(self) -> Alphabet:
        return self.channel.outputs

    @property
    def p_y(self) -> np.ndarray:
        return self.prior.weights @ self.channel.table

    @property
    def y_marginal(self) -> DiscreteDistribution:
        return DiscreteDistribution(self.y_alphabet, self.p_y)

    def support_mask(self) -> np.ndarray:
        return self.p_y > 0


@dataclass(frozen=True, eq=False)
class Estimator:
    """A (possibly randomized) restoration rule p(xhat|y)."""
    kernel: ConditionalKernel
    name: str = ""
    info: Mapping[str, Any] = field(default_factory=dict)

    @property
    def inputs(self) -> Alphabet:
        return self.kernel.inputs

    @property
    def outputs(self) -> Alphabet:
        return self.kernel.outputs

    @property
    def table(self) -> np.ndarray:
        return self.kernel.table


def deterministic_estimator(y_alphabet: Alphabet, outputs: Alphabet, choice,
                            name: str = "", info=None) -> Estimator:
    """Estimator mapping observation ``i`` to output index ``choice[i]``."""
    choice = np.asarray(choice, dtype=int)
    table = np.zeros((len(y_alphabet), len(outputs)))
    table[np.arange(len(y_alphabet)), choice] = 1.0
    return Estimator(ConditionalKernel(y_alphabet, outputs, table), name, dict(info or {}))


@dataclass(frozen=True, eq=False)
class JointDistribution:
    x_alphabet: Alphabet
    xhat_alphabet: Alphabet
    table: np.ndarray

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        if t.shape != (len(self.x_alphabet), len(self.xhat_alphabet)):
            raise InvalidAlphabet(f"joint table shape {t.shape} mismatches alphabets")
        _check_rows(t.reshape(1, -1), "joint distribution")
        object.__setattr__(self, "table", _frozen(t))

    @property
    def x_marginal(self) -> DiscreteDistribution:
        return DiscreteDistribution(self.x_alphabet, self.table.sum(axis=1))

    @property
    def xhat_marginal(self) -> DiscreteDistribution:
        return DiscreteDistribution(self.xhat_alphabet, self.table.sum(axis=0))


@dataclass(frozen=True, eq=False)
class DistortionMeasure:
    x_alphabet: Alphabet
    xhat_alphabet: Alphabet
    table: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        if t.shape != (len(self.x_alphabet), len(self.xhat_alphabet)):
            raise InvalidDistortion(f"cost table shape {t.shape} mismatches alphabets")
        if not np.all(np.isfinite(t)) or np.any(t < 0):
            raise InvalidDistortion("distortion must be finite and nonnegative")
        xhat_index = {s: j for j, s in enumerate(self.xhat_alphabet.labels)}
        for i, s in enumerate(self.x_alphabet.labels):
            j = xhat_index.get(s)
            if j is not None and t[i, j] != 0.0:
                raise InvalidDistortion(f"distortion of {s!r} with itself is {t[i, j]}, not 0")
        object.__setattr__(self, "table", _frozen(t))


@dataclass(frozen=True)
class Grid:
    lo: float
    hi: float
    n_bins: int

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n_bins + 1)

    @property
    def centers(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[:-1] + e[1:])


def _gaussian_bin_masses(edges: np.ndarray, mu: float, sigma: float) -> np.ndarray:
    # CDF at the interior edges; the outer edges are pinned to 0 and 1 so the
    # two tails fold into the end bins.
    z = (edges[1:-1] - mu) / sigma
    lower = np.concatenate(([0.0], ndtr(z)))
    upper = np.concatenate((ndtr(z), [1.0]))
    mass = upper - lower
    # upper half via survival function to keep precision in the right tail
    zs_lo = np.concatenate(([-np.inf], z))
    zs_hi = np.concatenate((z, [np.inf]))
    right = zs_lo >= 0
    mass[right] = ndtr(-zs_lo[right]) - ndtr(-zs_hi[right])
    return mass


def gaussian_noise_channel(x_values, sigma: float, grid, prior=None,
                           x_labels: Optional[Sequence] = None) -> DegradationModel:
    """Discretized additive Gaussian noise Y = X + N, N ~ N(0, sigma^2).

    Each row holds the Gaussian mass of every y-bin (bins are the uniform
    partition of ``[grid.lo, grid.hi]``); the two tails fold into the end
    bins.  ``prior`` defaults to uniform over ``x_values``.
    """
    if isinstance(grid, Mapping):
        grid = Grid(float(grid["lo"]), float(grid["hi"]), int(grid["n_bins"]))
    elif not isinstance(grid, Grid):
        grid = Grid(*grid)
    if not sigma > 0:
        raise NonPositiveSigma(f"sigma must be positive, got {sigma}")
    xs = np.asarray(x_values, dtype=float)
    if xs.ndim != 1 or xs.size == 0:
        raise MissingValues("x_values must be a non-empty list of scalars")
    if grid.n_bins < 3:
        raise GridTooNarrow(f"need at least 3 bins, got {grid.n_bins}")
    if grid.lo > xs.min() - 6 * sigma or grid.hi < xs.max() + 6 * sigma:
        raise GridTooNarrow(
            f"grid [{grid.lo}, {grid.hi}] must cover "
            f"[{xs.min() - 6 * sigma}, {xs.max() + 6 * sigma}]")
    x_alph = Alphabet.from_values(xs, x_labels)
    y_alph = Alphabet.from_values(grid.centers)
    table = np.stack([_gaussian_bin_masses(grid.edges, mu, sigma) for mu in xs])
    if prior is None:
        prior = np.full(xs.size, 1.0 / xs.size)
    return DegradationModel(DiscreteDistribution(x_alph, prior),
                            ConditionalKernel(x_alph, y_alph, table))


def posterior_table(model: DegradationModel) -> np.ndarray:
    """Full ``[y, x]`` posterior table.

    Rows for observations with p_Y(y) = 0 are set to the prior; they carry
    no probability, so every expectation is unaffected.
    """
    joint = model.prior.weights[:, None] * model.channel.table  # [x, y]
    p_y = joint.sum(axis=0)
    post = np.empty(joint.T.shape)
    pos = p_y > 0
    post[pos] = joint[:, pos].T / p_y[pos, None]
    post[~pos] = model.prior.weights
    return post


def posterior(model: DegradationModel) -> Posterior:
    """Bayes posterior p(x|y) over the observations with p_Y(y) > 0."""
    pos = model.support_mask()
    post = posterior_table(model)
    labels = model.y_alphabet.labels
    vals = model.y_alphabet.values
    kept = Alphabet(tuple(s for s, k in zip(labels, pos) if k),
                    None if vals is None else vals[pos])
    dropped = tuple(s for s, k in zip(labels, pos) if not k)
    return Posterior(kept, model.x_alphabet, post[pos], dropped)


def _require_estimator_inputs(model: DegradationModel, est: Estimator) -> None:
    same_labels(est.inputs, model.y_alphabet, "estimator input and model Y alphabets")


def output_distribution(model: DegradationModel, est: Estimator) -> DiscreteDistribution:
    _require_estimator_inputs(model, est)
    return DiscreteDistribution(est.outputs, model.p_y @ est.table)


def induced_joint(model: DegradationModel, est: Estimator) -> JointDistribution:
    """p(x, xhat) with X and Xhat independent given Y."""
    _require_estimator_inputs(model, est)
    post = posterior_table(model)
    table = np.einsum("y,yx,yk->xk", model.p_y, post, est.table)
    return JointDistribution(model.x_alphabet, est.outputs, table)


def conditional_cost(model: DegradationModel, dist: DistortionMeasure) -> np.ndarray:
    """Expected distortion of each output given each observation.

    Returns the ``[y, xhat]`` table ``f = sum_x cost[x, xhat] p(x|y)``.
    """
    same_labels(dist.x_alphabet, model.x_alphabet, "distortion and model X alphabets")
    return posterior_table(model) @ dist.table


def mean_distortion(model: DegradationModel, est: Estimator, dist: DistortionMeasure) -> float:
    _require_estimator_inputs(model, est)
    same_labels(dist.xhat_alphabet, est.outputs, "distortion and estimator output alphabets")
    f = conditional_cost(model, dist)
    return float(model.p_y @ np.einsum("yk,yk->y", f, est.table))


def square_error_measure(x_alphabet: Alphabet, xhat_alphabet: Optional[Alphabet] = None
                         ) -> DistortionMeasure:
    xhat_alphabet = x_alphabet if xhat_alphabet is None else xhat_alphabet
    a = x_alphabet.require_values()
    b = xhat_alphabet.require_values()
    if a.shape[1] != b.shape[1]:
        raise MissingValues(f"value dimensions differ: {a.shape[1]} vs {b.shape[1]}")
    table = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1)
    return DistortionMeasure(x_alphabet, xhat_alphabet, table, "square")


def zero_one_measure(x_alphabet: Alphabet, xhat_alphabet: Optional[Alphabet] = None
                     ) -> DistortionMeasure:
    xhat_alphabet = x_alphabet if xhat_alphabet is None else xhat_alphabet
    table = np.array([[0.0 if s == t else 1.0 for t in xhat_alphabet.labels]
                      for s in x_alphabet.labels])
    return DistortionMeasure(x_alphabet, xhat_alphabet, table, "zero_one")


def feature_map_distortion(x_alphabet: Alphabet, features,
                           xhat_alphabet: Optional[Alphabet] = None,
                           xhat_features=None) -> DistortionMeasure:
    """Squared distance between per-label feature vectors.

    A non-injective feature map makes distinct symbols indistinguishable,
    which is what produces non-unique optimal estimators.
    """
    fx = np.asarray(features, dtype=float)
    if fx.ndim == 1:
        fx = fx[:, None]
    if fx.shape[0] != len(x_alphabet):
        raise MissingValues(f"need one feature vector per label, got {fx.shape[0]}")
    if xhat_alphabet is None:
        xhat_alphabet, fy = x_alphabet, fx
    else:
        if xhat_features is None:
            raise MissingValues("xhat_features required with a separate output alphabet")
        fy = np.asarray(xhat_features, dtype=float).reshape(len(xhat_alphabet), -1)
    table = ((fx[:, None, :] - fy[None, :, :]) ** 2).sum(axis=-1)
    return DistortionMeasure(x_alphabet, xhat_alphabet, table, "feature")
