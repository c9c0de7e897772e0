"""Distortion bounds and the exact transportation solver.

``d_min`` is the unconstrained minimal distortion; ``d_max`` the minimal
distortion among estimators whose outputs are distributed like the
source.  The latter is a transportation problem from p_Y to p_X with cost
``f(xhat, y)``, solved exactly by successive shortest augmenting paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AlphabetMismatch
from .model import (
    ConditionalKernel,
    DegradationModel,
    DiscreteDistribution,
    DistortionMeasure,
    Estimator,
    conditional_cost,
    deterministic_estimator,
    mean_distortion,
    same_labels,
    square_error_measure,
)

MASS_EPS = 1e-15


@dataclass(frozen=True, eq=False)
class TransportProblem:
    source: DiscreteDistribution
    target: DiscreteDistribution
    cost: np.ndarray  # [source, target]

    def __post_init__(self):
        c = np.asarray(self.cost, dtype=float)
        if c.shape != (len(self.source), len(self.target)):
            raise ValueError(f"cost shape {c.shape} mismatches marginals")
        if not np.all(np.isfinite(c)):
            raise ValueError("transport cost must be finite")


@dataclass(frozen=True, eq=False)
class TransportSolution:
    plan: np.ndarray
    cost: float
    source_dual: np.ndarray
    target_dual: np.ndarray
    augmentations: int

    @property
    def dual_value(self) -> float:
        return float(self.source_dual @ self.plan.sum(axis=1)
                     + self.target_dual @ self.plan.sum(axis=0))


def _ssp(supply: np.ndarray, demand: np.ndarray, cost: np.ndarray):
    """Successive shortest paths; Dijkstra runs over the (few) sink nodes.

    Residual graph: every source->sink arc is uncapacitated, every arc with
    positive flow also has a reverse sink->source arc.  Potentials keep all
    residual reduced costs nonnegative, so reverse arcs are tight.
    """
    n, m = cost.shape
    excess = supply.astype(float).copy()
    deficit = demand.astype(float).copy()
    flow = np.zeros((n, m))
    pu = np.zeros(n)
    pv = cost.min(axis=0).astype(float)
    n_aug = 0
    while excess.max(initial=0.0) > MASS_EPS and deficit.max(initial=0.0) > MASS_EPS:
        rc = cost + pu[:, None] - pv[None, :]
        roots = excess > MASS_EPS
        dist_src = np.full(n, np.inf)
        dist_src[roots] = 0.0
        pred_src = np.full(n, -1)
        root_idx = np.flatnonzero(roots)
        sub = rc[root_idx]
        best = sub.argmin(axis=0)
        dist_snk = sub[best, np.arange(m)]
        pred_snk = root_idx[best]
        done = np.zeros(m, dtype=bool)
        reached = roots.copy()
        target = -1
        while True:
            cand = np.where(done, np.inf, dist_snk)
            j = int(cand.argmin())
            if not np.isfinite(cand[j]):
                break
            done[j] = True
            if deficit[j] > MASS_EPS:
                target = j
                break
            new = np.flatnonzero(~reached & (flow[:, j] > 0))
            if new.size == 0:
                continue
            reached[new] = True
            pred_src[new] = j
            dist_src[new] = dist_snk[j] + np.maximum(-rc[new, j], 0.0)
            via = dist_src[new][:, None] + rc[new]
            k = via.argmin(axis=0)
            vbest = via[k, np.arange(m)]
            better = (vbest < dist_snk) & ~done
            dist_snk[better] = vbest[better]
            pred_snk[better] = new[k[better]]
        if target < 0:
            raise RuntimeError("transport problem became infeasible (unbalanced marginals)")
        d_t = dist_snk[target]
        pu += np.minimum(dist_src, d_t)
        pv += np.minimum(np.where(done, dist_snk, np.inf), d_t)

        # walk the path back to its root source
        path = []  # (source, sink, +1 forward / -1 reverse)
        j = target
        while True:
            i = pred_snk[j]
            path.append((i, j, +1))
            jp = pred_src[i]
            if jp < 0:
                root = i
                break
            path.append((i, jp, -1))
            j = jp
        delta = min(excess[root], deficit[target])
        for i, j, sgn in path:
            if sgn < 0:
                delta = min(delta, flow[i, j])
        for i, j, sgn in path:
            if sgn > 0:
                flow[i, j] += delta
            elif flow[i, j] - delta <= MASS_EPS:
                flow[i, j] = 0.0
            else:
                flow[i, j] -= delta
        excess[root] = 0.0 if excess[root] - delta <= MASS_EPS else excess[root] - delta
        deficit[target] = 0.0 if deficit[target] - delta <= MASS_EPS else deficit[target] - delta
        n_aug += 1
    return flow, -pu, pv, n_aug


def solve_transport(supply, demand, cost) -> TransportSolution:
    """Exact minimum-cost coupling of ``supply`` (rows) and ``demand`` (columns).

    The demand vector is rescaled to the supply total so that marginals
    validated to 1e-9 balance exactly.  Returns the plan together with dual
    potentials ``a, b`` satisfying ``a_i + b_j <= cost_ij`` (up to rounding).
    """
    supply = np.asarray(supply, dtype=float)
    demand = np.asarray(demand, dtype=float)
    cost = np.asarray(cost, dtype=float)
    demand = demand * (supply.sum() / demand.sum())
    if cost.shape[1] > cost.shape[0]:
        flow, b, a, n_aug = _ssp(demand, supply, cost.T)
        flow = flow.T
    else:
        flow, a, b, n_aug = _ssp(supply, demand, cost)
    return TransportSolution(flow, float((flow * cost).sum()), a, b, n_aug)


def solve_problem(problem: TransportProblem) -> TransportSolution:
    return solve_transport(problem.source.weights, problem.target.weights, problem.cost)


def plan_to_kernel(plan: np.ndarray, p_y: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    """q(xhat|y) = plan / p_Y, with ``fallback`` rows where p_Y(y) = 0."""
    q = np.array(fallback, dtype=float, copy=True)
    rows = plan.sum(axis=1)
    pos = (p_y > 0) & (rows > 0)
    q[pos] = plan[pos] / rows[pos, None]
    return q


@dataclass(frozen=True, eq=False)
class BoundResult:
    value: float
    estimator: Estimator
    info: dict = field(default_factory=dict)


def d_min(model: DegradationModel, dist: DistortionMeasure) -> BoundResult:
    """Minimal attainable mean distortion and a deterministic minimizer."""
    f = conditional_cost(model, dist)
    choice = f.argmin(axis=1)
    fmin = f[np.arange(f.shape[0]), choice]
    ties = [model.y_alphabet.labels[i] for i in np.flatnonzero(
        ((f <= fmin[:, None] + 1e-12).sum(axis=1) > 1) & (model.p_y > 0))]
    est = deterministic_estimator(model.y_alphabet, dist.xhat_alphabet, choice,
                                  name="d_min", info={"ties": ties})
    return BoundResult(float(model.p_y @ fmin), est, {"ties": ties})


def _require_preserving_alphabet(model: DegradationModel, dist: DistortionMeasure) -> None:
    if dist.xhat_alphabet.labels != model.x_alphabet.labels:
        raise AlphabetMismatch("perfect perceptual quality needs the output alphabet "
                               "to equal the X alphabet")


def d_max(model: DegradationModel, dist: DistortionMeasure) -> BoundResult:
    """Minimal mean distortion subject to p_Xhat = p_X (exact transport)."""
    _require_preserving_alphabet(model, dist)
    f = conditional_cost(model, dist)
    p_y = model.p_y
    sol = solve_transport(p_y, model.prior.weights, f)
    fallback = np.zeros_like(f)
    fallback[np.arange(f.shape[0]), f.argmin(axis=1)] = 1.0
    q = plan_to_kernel(sol.plan, p_y, fallback)
    est = Estimator(ConditionalKernel(model.y_alphabet, dist.xhat_alphabet, q), "d_max",
                    {"augmentations": sol.augmentations})
    value = float(p_y @ np.einsum("yk,yk->y", f, q))
    return BoundResult(value, est, {"transport_cost": sol.cost,
                                    "dual_value": sol.dual_value})


@dataclass(frozen=True)
class PosteriorSamplingReport:
    d_min: float
    posterior_sampling_mse: float
    d_max: float
    ratio: float
    identity_holds: bool
    bound_holds: bool

    @property
    def ok(self) -> bool:
        return self.identity_holds and self.bound_holds


def verify_theorem4(model: DegradationModel, tol: float = 1e-9) -> PosteriorSamplingReport:
    """Check MSE(posterior sampling) = 2 D_min and D_max <= 2 D_min."""
    from .estimators import mmse_estimator, posterior_sampling_estimator

    x = model.x_alphabet
    x.require_values()
    mmse = mmse_estimator(model)
    dmin = mean_distortion(model, mmse, square_error_measure(x, mmse.outputs))
    sq = square_error_measure(x)
    ps = mean_distortion(model, posterior_sampling_estimator(model), sq)
    dmax = d_max(model, sq).value
    ratio = ps / dmin if dmin > 0 else float("nan")
    identity = abs(ps - 2 * dmin) <= tol * 2 * dmin + 1e-15
    bound = dmax <= ps + tol
    return PosteriorSamplingReport(dmin, ps, dmax, ratio, bool(identity), bool(bound))


__all__ = ["TransportProblem", "TransportSolution", "solve_transport", "solve_problem",
           "plan_to_kernel", "BoundResult", "d_min", "d_max", "verify_theorem4",
           "PosteriorSamplingReport", "same_labels"]
