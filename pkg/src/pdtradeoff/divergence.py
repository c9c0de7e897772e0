"""Divergences between discrete distributions.

All divergences are evaluated as ``d(p, q)`` with ``p`` the reference
(natural) distribution and ``q`` the one being judged, matching the
perceptual index ``d(p_X, p_Xhat)``.  Logs are natural.  Infinite values
are legitimate results, not errors.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import rel_entr

from .errors import AlphabetMismatch, MissingValues
from .model import Alphabet, DiscreteDistribution

MERGE_TOL = 1e-12


class DivergenceKind(enum.Enum):
    TV = "tv"
    KL = "kl"
    JS = "js"
    HELLINGER = "hellinger"
    CHI_SQUARE = "chi2"
    WASSERSTEIN1 = "w1"

    @property
    def is_smooth(self) -> bool:
        return self not in (DivergenceKind.TV, DivergenceKind.WASSERSTEIN1)

    @property
    def is_convex_in_second_arg(self) -> bool:
        return True

    @property
    def is_transport(self) -> bool:
        """TV and W1 are optimal-transport costs (0-1 and |x - x'| ground metrics)."""
        return not self.is_smooth

    @classmethod
    def parse(cls, name) -> "DivergenceKind":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "").replace("_", "")
        aliases = {"tv": cls.TV, "totalvariation": cls.TV, "kl": cls.KL, "js": cls.JS,
                   "jensenshannon": cls.JS, "hellinger": cls.HELLINGER,
                   "chi2": cls.CHI_SQUARE, "chisquare": cls.CHI_SQUARE,
                   "w1": cls.WASSERSTEIN1, "wasserstein": cls.WASSERSTEIN1,
                   "wasserstein1": cls.WASSERSTEIN1}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown divergence {name!r}") from None


# --- vector-level formulas -------------------------------------------------

def tv(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def kl(p: np.ndarray, q: np.ndarray) -> float:
    return float(rel_entr(p, q).sum())


def js(p: np.ndarray, q: np.ndarray) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    m = 0.5 * (p + q)
    return float(0.5 * rel_entr(p, m).sum() + 0.5 * rel_entr(q, m).sum())


def hellinger(p: np.ndarray, q: np.ndarray) -> float:
    """Squared Hellinger distance, 0.5 * sum (sqrt p - sqrt q)^2."""
    return 0.5 * float(((np.sqrt(p) - np.sqrt(q)) ** 2).sum())


def chi_square(p: np.ndarray, q: np.ndarray) -> float:
    """Pearson chi-square sum (p - q)^2 / q; infinite when q = 0 < p."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    diff2 = (p - q) ** 2
    pos = q > 0
    if np.any(diff2[~pos] > 0):
        return float("inf")
    return float((diff2[pos] / q[pos]).sum())


_VECTOR_FORMULAS = {
    DivergenceKind.TV: tv,
    DivergenceKind.KL: kl,
    DivergenceKind.JS: js,
    DivergenceKind.HELLINGER: hellinger,
    DivergenceKind.CHI_SQUARE: chi_square,
}


def divergence_vec(kind: DivergenceKind, p: np.ndarray, q: np.ndarray) -> float:
    # summation can leave a value a few ulps below zero for q ~= p
    return max(_VECTOR_FORMULAS[kind](p, q), 0.0)


def smoothed_value_and_grad(kind: DivergenceKind, p: np.ndarray, q: np.ndarray,
                            eps: float = 1e-12):
    """Value and gradient in ``q`` with ``q`` floored at ``eps``.

    Only for the optimizers; reported values always use the exact formulas.
    """
    qs = np.maximum(q, eps)
    if kind is DivergenceKind.KL:
        return float(rel_entr(p, qs).sum()), -p / qs
    if kind is DivergenceKind.CHI_SQUARE:
        return float(((p - qs) ** 2 / qs).sum()), 1.0 - (p / qs) ** 2
    if kind is DivergenceKind.HELLINGER:
        return 0.5 * float(((np.sqrt(p) - np.sqrt(qs)) ** 2).sum()), 0.5 * (1.0 - np.sqrt(p / qs))
    if kind is DivergenceKind.JS:
        m = 0.5 * (p + qs)
        val = 0.5 * rel_entr(p, m).sum() + 0.5 * rel_entr(qs, m).sum()
        return float(val), 0.5 * np.log(qs / m)
    raise ValueError(f"{kind} is not smooth")


# --- distribution-level API ------------------------------------------------

def _same_alphabet(p: DiscreteDistribution, q: DiscreteDistribution) -> None:
    if p.alphabet.labels != q.alphabet.labels:
        raise AlphabetMismatch("divergence arguments must share an alphabet")


def divergence(kind, p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    kind = DivergenceKind.parse(kind)
    if kind is DivergenceKind.WASSERSTEIN1:
        return wasserstein1(p, q)
    _same_alphabet(p, q)
    return divergence_vec(kind, p.weights, q.weights)


def w1_from_values(u_values, u_weights, v_values, v_weights) -> float:
    """W1 between two weighted point sets on the real line (CDF area)."""
    u_values = np.asarray(u_values, dtype=float)
    v_values = np.asarray(v_values, dtype=float)
    allv = np.concatenate((u_values, v_values))
    order = np.argsort(allv, kind="mergesort")
    sorted_v = allv[order]
    du = np.concatenate((np.asarray(u_weights, dtype=float), np.zeros(v_values.size)))[order]
    dv = np.concatenate((np.zeros(u_values.size), np.asarray(v_weights, dtype=float)))[order]
    cdf_gap = np.cumsum(du - dv)[:-1]
    return float(np.abs(cdf_gap) @ np.diff(sorted_v))


def wasserstein1(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    try:
        pv = p.alphabet.scalar_values()
        qv = q.alphabet.scalar_values()
    except MissingValues:
        raise MissingValues("Wasserstein-1 needs scalar values on both supports") from None
    return w1_from_values(pv, p.weights, qv, q.weights)


def success_probability(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """Success rate of the optimal real-vs-fake discriminator at equal priors."""
    return 0.5 * divergence(DivergenceKind.TV, p, q) + 0.5


def entropy(p: DiscreteDistribution) -> float:
    w = p.weights
    nz = w[w > 0]
    return float(-(nz * np.log(nz)).sum())


@dataclass(frozen=True)
class QualityIdentity:
    lhs: float
    d_kl: float
    entropy: float
    residual: float
    residual_as_printed: float


def mean_quality_identity(p_x: DiscreteDistribution, p_xhat: DiscreteDistribution
                          ) -> QualityIdentity:
    """Average log-likelihood quality of generated samples and its decomposition.

    ``lhs = sum p_xhat log p_x``.  Expanding the sum gives
    ``lhs = -KL(p_xhat || p_x) - H(p_xhat)``; ``residual`` is the error of
    that identity.  ``residual_as_printed`` checks the variant with
    ``+H(p_xhat)`` and is generally nonzero.
    """
    _same_alphabet(p_x, p_xhat)
    px, pq = p_x.weights, p_xhat.weights
    sup = pq > 0
    if np.any(px[sup] == 0):
        lhs = float("-inf")
    else:
        lhs = float(pq[sup] @ np.log(px[sup]))
    d = kl(pq, px)
    h = entropy(p_xhat)
    if np.isfinite(lhs):
        residual = lhs - (-d - h)
        printed = lhs - (-d + h)
    else:
        residual = 0.0 if d == float("inf") else float("nan")
        printed = residual
    return QualityIdentity(lhs, d, h, residual, printed)


# --- alignment of distributions on different alphabets ---------------------

def align(p: DiscreteDistribution, q: DiscreteDistribution):
    """Embed ``p`` and ``q`` on a common alphabet.

    Identical label sets are used as-is.  When both sides carry scalar or
    vector values, atoms are merged by value (within 1e-12); otherwise the
    union of labels is used.
    """
    if p.alphabet.labels == q.alphabet.labels:
        return p, q
    if p.alphabet.has_values and q.alphabet.has_values and p.alphabet.dim == q.alphabet.dim:
        pts: list = []
        def slot(v):
            for k, w in enumerate(pts):
                if np.max(np.abs(w - v)) <= MERGE_TOL:
                    return k
            pts.append(v)
            return len(pts) - 1
        pi = [slot(v) for v in p.alphabet.values]
        qi = [slot(v) for v in q.alphabet.values]
        alph = Alphabet.from_values(np.array(pts) if p.alphabet.dim > 1 else np.array(pts)[:, 0])
        wp = np.zeros(len(pts))
        wq = np.zeros(len(pts))
        np.add.at(wp, pi, p.weights)
        np.add.at(wq, qi, q.weights)
    else:
        labels = list(p.alphabet.labels) + [s for s in q.alphabet.labels
                                            if s not in set(p.alphabet.labels)]
        idx = {s: k for k, s in enumerate(labels)}
        alph = Alphabet(tuple(labels))
        wp = np.zeros(len(labels))
        wq = np.zeros(len(labels))
        wp[[idx[s] for s in p.alphabet.labels]] = p.weights
        wq[[idx[s] for s in q.alphabet.labels]] = q.weights
    return DiscreteDistribution(alph, wp), DiscreteDistribution(alph, wq)


def binned(p: DiscreteDistribution, lo: float, hi: float, n_bins: int = 512) -> np.ndarray:
    """Histogram of a scalar-valued distribution on a uniform grid."""
    v = p.alphabet.scalar_values()
    if hi <= lo:
        hi = lo + 1.0
    idx = np.clip(((v - lo) / (hi - lo) * n_bins).astype(int), 0, n_bins - 1)
    out = np.zeros(n_bins)
    np.add.at(out, idx, p.weights)
    return out


def compare(kind, p_x: DiscreteDistribution, p_xhat: DiscreteDistribution,
            n_bins: int = 512) -> float:
    """Perceptual index between distributions that may live on different supports.

    W1 uses the raw values.  Other kinds use a shared alphabet when the
    supports already coincide after merging; otherwise scalar supports are
    binned onto a common uniform grid of ``n_bins`` cells.
    """
    kind = DivergenceKind.parse(kind)
    if kind is DivergenceKind.WASSERSTEIN1:
        return wasserstein1(p_x, p_xhat)
    a, b = align(p_x, p_xhat)
    scalar = (p_x.alphabet.dim == 1 and p_xhat.alphabet.dim == 1)
    if scalar and len(a) > max(len(p_x), len(p_xhat)):
        v = np.concatenate((p_x.alphabet.scalar_values(), p_xhat.alphabet.scalar_values()))
        lo, hi = float(v.min()), float(v.max())
        return divergence_vec(kind, binned(p_x, lo, hi, n_bins), binned(p_xhat, lo, hi, n_bins))
    return divergence_vec(kind, a.weights, b.weights)

__all__ = [
    "DivergenceKind", "divergence", "divergence_vec", "wasserstein1", "w1_from_values",
    "success_probability", "entropy", "mean_quality_identity", "QualityIdentity",
    "align", "compare", "binned", "tv", "kl", "js", "hellinger", "chi_square",
]
