"""The perception-distortion function on finite alphabets.

``P(D) = min d(p_X, p_Xhat)  s.t.  E[cost(X, Xhat)] <= D`` over kernels
q(xhat|y).  The Lagrangian ``E[cost] + lam * d(p_X, p_Xhat)`` is solved per
multiplier:

* TV and W1 are transport costs, so the Lagrangian is itself a single
  transport problem from p_Y to p_X with cost
  ``min_k f(k, y) + lam * ground(k, x)`` and is solved exactly.
* Smooth divergences (KL, JS, squared Hellinger, chi-square) use
  conditional-gradient iterations over the product of simplices, with a
  Frank-Wolfe duality gap as certificate.  ``step="harmonic"`` is the
  classic 2/(t+2) rule; ``step="pairwise"`` moves mass between the worst
  and best atom of every row with an exact line search and converges
  linearly on these problems.
* The subgradient scheme for TV is kept as ``tv_method="subgradient"``.

``constrained_solve`` bisects on the multiplier and mixes the two
bracketing kernels to meet the distortion level exactly.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import rel_entr

from .bounds import d_max, d_min, plan_to_kernel, solve_transport
from .divergence import DivergenceKind, divergence_vec, smoothed_value_and_grad, w1_from_values
from .errors import AlphabetMismatch, InfeasibleDistortion, MissingValues, TooLarge
from .model import (
    ConditionalKernel,
    DegradationModel,
    DistortionMeasure,
    Estimator,
    conditional_cost,
    mean_distortion,
    output_distribution,
    posterior_table,
    same_labels,
)


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 5000
    tol: float = 1e-6
    step: str = "pairwise"          # or "harmonic" (2/(t+2))
    tv_method: str = "exact"        # or "subgradient"
    tv_iters: int = 20000
    tv_step: float = 1.0
    eps: float = 1e-12
    lambda_max: float = 1e8
    bisection_depth: int = 60
    distortion_tol: float = 1e-6


@dataclass(frozen=True, eq=False)
class TradeoffPoint:
    lam: float
    distortion: float
    perception: float
    duality_gap: float
    kernel: ConditionalKernel
    output: np.ndarray = field(repr=False, default=None)
    converged: bool = True
    iterations: int = 0
    method: str = ""

    def as_estimator(self) -> Estimator:
        return Estimator(self.kernel, f"lagrangian(lam={self.lam:g})")


# --- problem preparation ----------------------------------------------------

@dataclass(frozen=True, eq=False)
class _Problem:
    kind: DivergenceKind
    f: np.ndarray          # [y, k] conditional cost
    p_y: np.ndarray
    p_x: np.ndarray
    ground: Optional[np.ndarray]   # [k, x] ground metric for transport kinds
    y_alphabet: object
    out_alphabet: object
    x_values: Optional[np.ndarray]
    out_values: Optional[np.ndarray]
    cache: dict = field(default_factory=dict, repr=False)

    def perception(self, r: np.ndarray) -> float:
        if self.kind is DivergenceKind.WASSERSTEIN1:
            return w1_from_values(self.x_values, self.p_x, self.out_values, r)
        return divergence_vec(self.kind, self.p_x, r)

    def distortion(self, q: np.ndarray) -> float:
        return float(self.p_y @ np.einsum("yk,yk->y", self.f, q))


def _prepare(model: DegradationModel, dist: DistortionMeasure, kind) -> _Problem:
    kind = DivergenceKind.parse(kind)
    same_labels(dist.x_alphabet, model.x_alphabet, "distortion and model X alphabets")
    f = conditional_cost(model, dist)
    out = dist.xhat_alphabet
    xv = ov = None
    ground = None
    if kind is DivergenceKind.WASSERSTEIN1:
        try:
            xv = model.x_alphabet.scalar_values()
            ov = out.scalar_values()
        except MissingValues:
            raise MissingValues("W1 perception needs scalar values on X and outputs") from None
        ground = np.abs(ov[:, None] - xv[None, :])
    else:
        if out.labels != model.x_alphabet.labels:
            raise AlphabetMismatch(f"{kind.name} perception needs output alphabet = X alphabet")
        if kind is DivergenceKind.TV:
            ground = 1.0 - np.eye(len(out))
    return _Problem(kind, f, model.p_y, model.prior.weights, ground,
                    model.y_alphabet, out, xv, ov)


def _point(prob: _Problem, lam, q, gap, converged, iters, method) -> TradeoffPoint:
    q = q / q.sum(axis=1, keepdims=True)
    kernel = ConditionalKernel(prob.y_alphabet, prob.out_alphabet, q)
    r = prob.p_y @ q
    return TradeoffPoint(float(lam), prob.distortion(q), prob.perception(r), float(gap),
                         kernel, r, bool(converged), int(iters), method)


def _default_init(prob: _Problem, model: DegradationModel) -> np.ndarray:
    if prob.out_alphabet.labels == model.x_alphabet.labels:
        return posterior_table(model).copy()
    return np.full(prob.f.shape, 1.0 / prob.f.shape[1])


# --- transport-type divergences: exact -----------------------------------------

def _transport_lagrangian(prob: _Problem, lam: float, mask: Optional[np.ndarray] = None,
                          perception_only: bool = False):
    """Exact minimizer of E[f] + lam * T_ground(p_X, r) via one transport problem."""
    base = np.zeros_like(prob.f) if perception_only else prob.f
    if mask is not None:
        base = np.where(mask, base, np.inf)
    weight = 1.0 if perception_only else lam
    # composed[y, x, k] = base[y, k] + weight * ground[k, x]
    composed = base[:, None, :] + weight * prob.ground.T[None, :, :]
    route = composed.argmin(axis=2)
    cost = np.take_along_axis(composed, route[:, :, None], axis=2)[:, :, 0]
    sol = solve_transport(prob.p_y, prob.p_x, cost)
    n_y, n_k = prob.f.shape
    q = np.zeros((n_y, n_k))
    for x in range(prob.ground.shape[1]):
        np.add.at(q, (np.arange(n_y), route[:, x]), sol.plan[:, x])
    rows = q.sum(axis=1)
    empty = rows <= 0
    q[~empty] /= rows[~empty, None]
    if empty.any():
        fb = base[empty].argmin(axis=1)
        q[np.flatnonzero(empty), fb] = 1.0
    gap = abs(sol.cost - sol.dual_value)
    return q, gap


def _tv_subgradient(prob: _Problem, lam: float, q0: np.ndarray, opts: SolverOptions):
    """Projected subgradient with c/sqrt(t) steps and iterate averaging."""
    from .simplex import project_rows

    q = q0.copy()
    avg = np.zeros_like(q)
    best_q, best_val = q.copy(), np.inf
    weight_sum = 0.0
    for t in range(1, opts.tv_iters + 1):
        r = prob.p_y @ q
        val = prob.distortion(q) + lam * 0.5 * np.abs(prob.p_x - r).sum()
        if val < best_val:
            best_val, best_q = val, q.copy()
        g_r = 0.5 * np.sign(r - prob.p_x)
        grad = prob.p_y[:, None] * (prob.f + lam * g_r[None, :])
        nrm = np.linalg.norm(grad)
        if nrm == 0:
            break
        step = opts.tv_step / math.sqrt(t)
        q = project_rows(q - step * grad / nrm)
        avg += q
        weight_sum += 1.0
    avg /= max(weight_sum, 1.0)
    r_avg = prob.p_y @ avg
    avg_val = prob.distortion(avg) + lam * 0.5 * np.abs(prob.p_x - r_avg).sum()
    if avg_val < best_val:
        best_q, best_val, other = avg, avg_val, best_val
    else:
        other = avg_val
    spread = abs(other - best_val)
    return best_q, spread, t


# --- smooth divergences: conditional gradient ----------------------------------

def _restrict(q0: np.ndarray, mask: Optional[np.ndarray]) -> np.ndarray:
    q = np.array(q0, dtype=float, copy=True)
    if mask is not None:
        q = np.where(mask, q, 0.0)
        bad = q.sum(axis=1) <= 0
        q[bad] = mask[bad]
    return q / q.sum(axis=1, keepdims=True)


def _pfw(prob: _Problem, lam: float, q0: np.ndarray, opts: SolverOptions,
         mask: Optional[np.ndarray], perception_only: bool):
    """Block-wise pairwise conditional gradient.

    The kernel is a product of simplices (one per y).  Each outer iteration
    computes the full gradient, ranks rows by their local Frank-Wolfe gap and
    then, row by row, moves mass from the worst supported output to the best
    one with an exact line search.  Rows only interact through p_Xhat, which
    is updated after every row step.  Stepping rows separately avoids the
    tiny common step sizes that arise when a well-conditioned row and an
    ill-conditioned row share one direction.
    """
    kind, p_x, p_y = prob.kind, prob.p_x, prob.p_y
    f = np.zeros_like(prob.f) if perception_only else prob.f
    w = 1.0 if perception_only else lam
    eps = opts.eps
    lin_cost = p_y[:, None] * f
    tol = opts.tol * max(w, 1e-4)
    n_y, n_k = f.shape
    rows = np.arange(n_y)
    allowed = np.ones((n_y, n_k), dtype=bool) if mask is None else mask
    q = q0.copy()
    r = p_y @ q

    def grad_r(rr):
        if w == 0:
            return np.zeros(n_k)
        return w * smoothed_value_and_grad(kind, p_x, rr, eps)[1]

    block = min(n_y, 64)
    gap = np.inf
    it = 0
    for it in range(1, opts.max_iters + 1):
        if it % 200 == 0:
            q /= q.sum(axis=1, keepdims=True)
            r = p_y @ q
        g = grad_r(r)
        grad = lin_cost + p_y[:, None] * g[None, :]
        s = np.where(allowed, grad, np.inf).argmin(axis=1)
        local = (grad * q).sum(axis=1) - grad[rows, s]
        gap = float(local.sum())
        if gap <= tol:
            return q, max(gap, 0.0), it, True
        order = np.argsort(-local)[:block]
        for y in order:
            if local[y] <= 0.0:
                break
            py = p_y[y]
            g = grad_r(r)
            gy = lin_cost[y] + py * g
            sy = int(np.where(allowed[y], gy, np.inf).argmin())
            ay = int(np.where(q[y] > 0, gy, -np.inf).argmax())
            if ay == sy or gy[ay] <= gy[sy]:
                continue
            cap = q[y, ay]
            lin = lin_cost[y, sy] - lin_cost[y, ay]

            def slope(t, y=y, ay=ay, sy=sy, lin=lin, py=py):
                if w == 0:
                    return lin
                rr = r.copy()
                rr[sy] += py * t
                rr[ay] -= py * t
                gg = grad_r(rr)
                return lin + py * (gg[sy] - gg[ay])

            if not slope(0.0) < 0:  # descent lost to rounding
                continue
            if slope(cap) <= 0:
                step = cap
            else:
                step = brentq(slope, 0.0, cap, xtol=1e-18,
                              rtol=4 * np.finfo(float).eps, maxiter=200)
            q[y, sy] += step
            if step >= cap:
                q[y, ay] = 0.0
            else:
                q[y, ay] -= step
            r[sy] += py * step
            r[ay] -= py * step
            np.maximum(r, 0.0, out=r)
    return q, max(gap, 0.0), it, gap <= tol


def _fw(prob: _Problem, lam: float, q0: np.ndarray, opts: SolverOptions,
        mask: Optional[np.ndarray] = None, perception_only: bool = False):
    """Frank-Wolfe over row-stochastic kernels.

    Returns (kernel, final FW gap, iterations, converged).  With ``mask`` the
    linear minimization only selects allowed atoms; with ``perception_only``
    the objective is the divergence alone.
    """
    q = _restrict(q0, mask)
    if opts.step == "pairwise":
        return _pfw(prob, lam, q, opts, mask, perception_only)
    kind, p_x, p_y = prob.kind, prob.p_x, prob.p_y
    f = np.zeros_like(prob.f) if perception_only else prob.f
    w = 1.0 if perception_only else lam
    eps = opts.eps
    lin_cost = p_y[:, None] * f
    tol = opts.tol * max(w, 1e-4)
    rows = np.arange(q.shape[0])
    gap = np.inf
    it = 0
    for it in range(1, opts.max_iters + 1):
        r = p_y @ q
        if w > 0:
            _, g_r = smoothed_value_and_grad(kind, p_x, r, eps)
        else:
            g_r = np.zeros_like(r)
        grad = lin_cost + p_y[:, None] * (w * g_r)[None, :]
        masked = grad if mask is None else np.where(mask, grad, np.inf)
        s = masked.argmin(axis=1)
        gap = float((grad * q).sum() - grad[rows, s].sum())
        if gap <= tol:
            return q, max(gap, 0.0), it, True
        if opts.step == "harmonic":
            d = -q
            d[rows, s] += 1.0
            gamma = 2.0 / (it + 2.0)
            q = q + gamma * d
            continue
        raise ValueError(f"unknown step rule {opts.step!r}")
    return q, max(gap, 0.0), it, gap <= tol


# --- public API -------------------------------------------------------------------

def lagrangian_solve(model: DegradationModel, dist: DistortionMeasure, kind, lam: float,
                     opts: SolverOptions = SolverOptions(),
                     init: Optional[np.ndarray] = None) -> TradeoffPoint:
    """Minimize ``E[cost] + lam * d(p_X, p_Xhat)`` over kernels.

    Points whose certificate exceeds ``opts.tol`` come back with
    ``converged=False`` rather than raising.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    prob = _prepare(model, dist, kind)
    return _solve(prob, model, lam, opts, init)


def _solve(prob: _Problem, model, lam, opts, init=None) -> TradeoffPoint:
    if prob.kind.is_transport:
        if prob.kind is DivergenceKind.TV and opts.tv_method == "subgradient":
            q0 = _default_init(prob, model) if init is None else np.asarray(init, dtype=float)
            q, spread, iters = _tv_subgradient(prob, lam, q0, opts)
            return _point(prob, lam, q, spread, spread <= opts.tol, iters, "subgradient")
        q, gap = _transport_lagrangian(prob, lam)
        return _point(prob, lam, q, gap, True, 1, "transport")
    q0 = _best_start(prob, model, lam, init, opts.eps)
    q, gap, iters, ok = _fw(prob, lam, q0, opts)
    return _point(prob, lam, q, gap, ok, iters, f"fw-{opts.step}")


def _transport_kernel(prob: _Problem, model) -> Optional[np.ndarray]:
    """Kernel of the exact D_max coupling (the lam -> infinity solution), cached."""
    if "top" not in prob.cache:
        top = None
        if prob.out_alphabet.labels == model.x_alphabet.labels:
            sol = solve_transport(prob.p_y, prob.p_x, prob.f)
            fallback = np.zeros_like(prob.f)
            fallback[np.arange(prob.f.shape[0]), prob.f.argmin(axis=1)] = 1.0
            top = plan_to_kernel(sol.plan, prob.p_y, fallback)
        prob.cache["top"] = top
    return prob.cache["top"]


def _best_start(prob: _Problem, model, lam: float, init, eps: float) -> np.ndarray:
    """Lowest-objective kernel among the warm start, the posterior and the D_max kernel.

    Large multipliers make the problem close to a transport problem, which
    row-wise steps solve slowly from far away; the exact transport kernel is
    then an excellent start.
    """
    cands = [_default_init(prob, model)]
    if init is not None:
        cands.append(np.asarray(init, dtype=float))
    top = _transport_kernel(prob, model)
    if top is not None:
        cands.append(top)

    def objective(q):
        r = prob.p_y @ q
        val = smoothed_value_and_grad(prob.kind, prob.p_x, r, eps)[0] if lam > 0 else 0.0
        return prob.distortion(q) + lam * val

    return min(cands, key=objective).copy()


def _min_perception_on_support(prob: _Problem, model, dist, opts) -> TradeoffPoint:
    """Best perception among distortion-minimizing kernels (the lam -> 0+ limit)."""
    from .estimators import optimal_support

    mask = optimal_support(model, dist)
    if prob.kind.is_transport:
        q, gap = _transport_lagrangian(prob, 0.0, mask=mask, perception_only=True)
        return _point(prob, 0.0, q, gap, True, 1, "transport-support")
    q, gap, iters, ok = _fw(prob, 0.0, _default_init(prob, model), opts, mask=mask,
                            perception_only=True)
    return _point(prob, 0.0, q, gap, ok, iters, "fw-support")


def mix_points(prob: _Problem, a: TradeoffPoint, b: TradeoffPoint, theta: float,
               lam: float) -> TradeoffPoint:
    q = theta * a.kernel.table + (1 - theta) * b.kernel.table
    return _point(prob, lam, q, max(a.duality_gap, b.duality_gap),
                  a.converged and b.converged, a.iterations + b.iterations, "mixture")


@dataclass(frozen=True, eq=False)
class ConstrainedResult:
    perception: float
    distortion: float
    kernel: ConditionalKernel
    lam: float
    point: TradeoffPoint
    how: str


def constrained_solve(model: DegradationModel, dist: DistortionMeasure, kind, D: float,
                      opts: SolverOptions = SolverOptions()) -> ConstrainedResult:
    """P(D): minimal perception subject to mean distortion at most ``D``."""
    prob = _prepare(model, dist, kind)
    dmin = d_min(model, dist).value
    if D < dmin - 1e-8:
        raise InfeasibleDistortion(f"D={D} is below D_min={dmin}")

    def done(pt: TradeoffPoint, how: str) -> ConstrainedResult:
        return ConstrainedResult(pt.perception, pt.distortion, pt.kernel, pt.lam, pt, how)

    hi = None
    if prob.out_alphabet.labels == model.x_alphabet.labels:
        top = d_max(model, dist)
        hi = _point(prob, math.inf, top.estimator.table, 0.0, True, 1, "d_max")
        if D >= hi.distortion:
            return done(hi, "d_max")
    if D <= dmin + 1e-12:
        return done(_min_perception_on_support(prob, model, dist, opts), "support")
    if hi is None:
        hi = _solve(prob, model, opts.lambda_max, opts)
        if hi.distortion <= D:
            return done(hi, "lambda_max")
    lo = _min_perception_on_support(prob, model, dist, opts)
    if lo.distortion > D:  # tolerance slack around D_min
        return done(lo, "support")

    # geometric search on the multiplier: expand by decades until bracketed,
    # then bisect log(lambda); the last kernel warm-starts the next solve
    lam_lo, lam_hi = 0.0, math.inf
    lam = 1.0
    init = lo.kernel.table
    lam_floor = opts.lambda_max ** -1
    for _ in range(opts.bisection_depth):
        pt = _solve(prob, model, lam, opts, init)
        init = pt.kernel.table
        if pt.distortion <= D:
            lo, lam_lo = pt, lam
        else:
            hi, lam_hi = pt, lam
        if abs(D - pt.distortion) <= opts.distortion_tol:
            break
        if math.isinf(lam_hi):
            if lam >= opts.lambda_max:
                break
            lam = min(lam * 10.0, opts.lambda_max)
        elif lam_lo == 0.0:
            if lam <= lam_floor:
                break
            lam = max(lam / 10.0, lam_floor)
        else:
            if lam_hi / lam_lo < 1.0 + 1e-12:
                break
            lam = math.sqrt(lam_lo * lam_hi)
    if hi.distortion <= lo.distortion:
        return done(lo, "bisection")
    theta = (hi.distortion - D) / (hi.distortion - lo.distortion)
    theta = min(max(theta, 0.0), 1.0)
    mix = mix_points(prob, lo, hi, theta, math.sqrt(max(lam_lo, lam_floor) * min(lam_hi, opts.lambda_max)))
    best = mix if mix.perception <= lo.perception else lo
    return done(best, "mixture" if best is mix else "bisection")


# --- curves --------------------------------------------------------------------

def lower_convex_envelope(points: Iterable[tuple]) -> list:
    """Vertices of the greatest convex non-increasing minorant of (D, P) points."""
    # infinite perception (e.g. KL at a kernel missing part of the support)
    # carries no information about the finite part of the envelope
    pts = sorted((float(d), float(p)) for d, p in points if math.isfinite(p))
    mono = []
    best = math.inf
    for d, p in pts:
        if mono and d == mono[-1][0]:
            best = min(best, p)
            mono[-1] = (d, best)
            continue
        best = min(best, p)
        mono.append((d, best))
    hull: list = []
    for pt in mono:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            cross = (x2 - x1) * (pt[1] - y1) - (y2 - y1) * (pt[0] - x1)
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(pt)
    return hull


def envelope_value(hull: Sequence[tuple], D: float) -> float:
    if not hull or D < hull[0][0]:
        return math.inf
    for (x1, y1), (x2, y2) in zip(hull, hull[1:]):
        if D <= x2:
            t = 0.0 if x2 == x1 else (D - x1) / (x2 - x1)
            return y1 + t * (y2 - y1)
    return hull[-1][1]


@dataclass(frozen=True, eq=False)
class TradeoffCurve:
    points: tuple
    kind: DivergenceKind
    measure: str
    envelope: tuple

    def perception_at(self, D: float) -> float:
        return envelope_value(self.envelope, D)

    @property
    def flagged(self) -> list:
        return [p for p in self.points if not p.converged]

    def rows(self) -> list:
        """(lambda, distortion, enveloped perception, gap, converged) per point."""
        return [(p.lam, p.distortion, self.perception_at(p.distortion), p.duality_gap,
                 p.converged) for p in self.points]


def trace_curve(model: DegradationModel, dist: DistortionMeasure, kind,
                lambdas: Sequence[float], opts: SolverOptions = SolverOptions(),
                warm_start: bool = True, endpoints: bool = True) -> TradeoffCurve:
    """Solve the Lagrangian along an ascending multiplier schedule.

    With ``endpoints`` the curve also holds the lam = 0 limit (best perception
    among distortion minimizers) and, when outputs share the X alphabet, the
    exact perfect-quality point at D_max (reported with lam = inf).
    """
    lambdas = [float(v) for v in lambdas]
    if len(lambdas) < 2:
        raise ValueError("need at least two lambda values")
    if any(b < a for a, b in zip(lambdas, lambdas[1:])):
        raise ValueError("lambda schedule must be sorted ascending")
    if lambdas[0] < 0:
        raise ValueError("lambda must be nonnegative")
    prob = _prepare(model, dist, kind)
    pts = []
    init = None
    for lam in lambdas:
        pt = _solve(prob, model, lam, opts, init if warm_start else None)
        pts.append(pt)
        init = pt.kernel.table
    if endpoints:
        pts.append(_min_perception_on_support(prob, model, dist, opts))
        top = _transport_kernel(prob, model)
        if top is not None:
            pts.append(_point(prob, math.inf, top, 0.0, True, 1, "d_max"))
    pts.sort(key=lambda p: (p.distortion, p.perception, p.lam))
    hull = lower_convex_envelope((p.distortion, p.perception) for p in pts)
    return TradeoffCurve(tuple(pts), prob.kind, dist.name, tuple(hull))


def default_lambdas(n: int = 24, lo: float = 1e-3, hi: float = 1e3) -> list:
    return list(np.logspace(math.log10(lo), math.log10(hi), n))


def fmt(x: float) -> str:
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    x = float(x)
    return repr(0.0 if x == 0.0 else x)  # shortest round-trip form, no "-0.0"


def curve_csv(curve: TradeoffCurve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    flagged = bool(curve.flagged)
    header = ["lambda", "distortion", "perception", "gap"] + (["flagged"] if flagged else [])
    w.writerow(header)
    for lam, D, P, gap, ok in curve.rows():
        row = [fmt(lam), fmt(D), fmt(P), fmt(gap)]
        if flagged:
            row.append("0" if ok else "1")
        w.writerow(row)
    return buf.getvalue()


# --- verification oracle -----------------------------------------------------------

def simplex_grid(k: int, resolution: int) -> np.ndarray:
    """All points of the k-simplex with coordinates in multiples of 1/(resolution-1)."""
    m = resolution - 1
    pts = []
    for bars in itertools.combinations(range(m + k - 1), k - 1):
        prev = -1
        comp = []
        for b in bars:
            comp.append(b - prev - 1)
            prev = b
        comp.append(m + k - 2 - prev)
        pts.append(comp)
    return np.array(pts, dtype=float) / m


def _batch_divergence(prob: _Problem, R: np.ndarray) -> np.ndarray:
    p = prob.p_x[None, :]
    kind = prob.kind
    if kind is DivergenceKind.TV:
        return 0.5 * np.abs(R - p).sum(axis=1)
    if kind is DivergenceKind.KL:
        return rel_entr(p, R).sum(axis=1)
    if kind is DivergenceKind.JS:
        m = 0.5 * (p + R)
        return 0.5 * rel_entr(p, m).sum(axis=1) + 0.5 * rel_entr(R, m).sum(axis=1)
    if kind is DivergenceKind.HELLINGER:
        return 0.5 * ((np.sqrt(p) - np.sqrt(R)) ** 2).sum(axis=1)
    if kind is DivergenceKind.CHI_SQUARE:
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(R > 0, (p - R) ** 2 / R, np.where(p > 0, np.inf, 0.0))
        return terms.sum(axis=1)
    xs = np.concatenate((prob.x_values, prob.out_values))
    order = np.argsort(xs, kind="mergesort")
    widths = np.diff(xs[order])
    mass = np.concatenate((np.broadcast_to(p, (R.shape[0], p.shape[1])), -R), axis=1)[:, order]
    return np.abs(np.cumsum(mass, axis=1)[:, :-1]) @ widths


def _best_product(prob: _Problem, cands: list, D: float):
    """Exhaustive search over one candidate row per y; returns (key, choice).

    ``key`` is (divergence, total variation) so that ties among infinite
    divergences still rank kernels by how close their output is to p_X.
    """
    n_y = len(cands)
    n_k = prob.f.shape[1]
    dist_rows = [prob.p_y[y] * (cands[y] @ prob.f[y]) for y in range(n_y)]
    mass_rows = [prob.p_y[y] * cands[y] for y in range(n_y)]
    slack = 1e-12
    tail = min(n_y, 2)
    head = n_y - tail
    if tail == 1:
        tail_d = dist_rows[-1]
        tail_m = mass_rows[-1]
        tail_idx = np.arange(len(cands[-1]))[:, None]
    else:
        tail_d = (dist_rows[-2][:, None] + dist_rows[-1][None, :]).ravel()
        tail_m = (mass_rows[-2][:, None, :] + mass_rows[-1][None, :, :]).reshape(-1, n_k)
        a, b = np.meshgrid(np.arange(len(cands[-2])), np.arange(len(cands[-1])), indexing="ij")
        tail_idx = np.stack((a.ravel(), b.ravel()), axis=1)
    best_key, best_choice = (math.inf, math.inf), None
    for combo in itertools.product(*(range(len(c)) for c in cands[:head])):
        d0 = sum((dist_rows[y][i] for y, i in enumerate(combo)), 0.0)
        feasible = np.flatnonzero(d0 + tail_d <= D + slack)
        if feasible.size == 0:
            continue
        m0 = sum((mass_rows[y][i] for y, i in enumerate(combo)), np.zeros(n_k))
        R = m0[None, :] + tail_m[feasible]
        vals = _batch_divergence(prob, R)
        tvs = 0.5 * np.abs(R - prob.p_x[None, :]).sum(axis=1)
        j = int(np.lexsort((tvs, vals))[0])
        key = (float(vals[j]), float(tvs[j]))
        if key < best_key:
            best_key = key
            best_choice = tuple(combo) + tuple(tail_idx[feasible[j]])
    return best_key, best_choice


def brute_force_oracle(model: DegradationModel, dist: DistortionMeasure, kind, D: float,
                       resolution: int = 21, max_kernels: float = 5e8,
                       refine: int = 0) -> float:
    """Minimal perception over grid kernels with mean distortion <= D.

    Rows are enumerated independently on the simplex grid of step
    1/(resolution-1), so the result upper-bounds P(D).  With ``refine > 0``
    a second search runs over output distributions instead of kernels (see
    ``_output_space_search``) with ``refine`` zoom levels; its candidates are
    also realized by explicit feasible kernels, so the minimum of the two is
    still an upper bound.  Returns ``inf`` when no candidate meets the
    distortion level.
    """
    prob = _prepare(model, dist, kind)
    n_y, n_k = prob.f.shape
    if len(model.x_alphabet) * n_y * n_k > 64:
        raise TooLarge("oracle limited to |X|*|Y|*|Xhat| <= 64")
    if resolution > 21 or resolution < 2:
        raise TooLarge("oracle resolution must be in [2, 21]")
    grid = simplex_grid(n_k, resolution)
    if float(len(grid)) ** n_y > max_kernels:
        raise TooLarge(f"{len(grid)}^{n_y} grid kernels is too many")
    key, _ = _best_product(prob, [grid] * n_y, D)
    if refine <= 0:
        return key[0]
    return min(key[0], _output_space_search(prob, D, refine))


def _output_space_search(prob: _Problem, D: float, levels: int) -> float:
    """Grid search over output distributions r with exact transport feasibility.

    The smallest distortion of any kernel producing r is the transport cost
    from p_Y to r, computed here by vertex enumeration.  A fine lattice on
    the simplex of r is scanned, then boxes around the incumbent are rescanned
    ``levels`` times, each ten times finer.  Every accepted r is realized by
    an explicit kernel, so the result is an upper bound on P(D).
    """
    from .oracles import VertexTransport, simplex_lattice

    n_k = prob.f.shape[1]
    vt = VertexTransport(prob.p_y, prob.f)
    budget = 4e7 / len(vt.bases)
    step = 1.0
    while step > 1e-6:
        finer = step / 2.0
        if math.comb(int(round(1 / finer)) + n_k - 1, n_k - 1) > budget:
            break
        step = finer
    step = 1.0 / math.ceil(1.0 / step)

    def scan(pts):
        feas = vt.costs(pts) <= D + 1e-12
        if not feas.any():
            return math.inf, None
        vals = _batch_divergence(prob, pts[feas])
        j = int(vals.argmin())
        return float(vals[j]), pts[feas][j]

    best, center = scan(simplex_lattice(n_k, step))
    for _ in range(levels):
        if center is None:
            break
        box = simplex_lattice(n_k, step / 10.0, center=center, halfwidth=5.0 * step)
        val, pt = scan(box)
        if val < best:
            best, center = val, pt
        step /= 10.0
    return best


# --- mixtures ---------------------------------------------------------------------

def mixture_estimator(e1: Estimator, e2: Estimator, lam: float) -> Estimator:
    """Kernel lam * q1 + (1 - lam) * q2."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError("mixture weight must lie in [0, 1]")
    same_labels(e1.inputs, e2.inputs, "estimator input alphabets")
    same_labels(e1.outputs, e2.outputs, "estimator output alphabets")
    if lam == 0.0:
        return e2
    if lam == 1.0:
        return e1
    table = lam * e1.table + (1 - lam) * e2.table
    return Estimator(ConditionalKernel(e1.inputs, e1.outputs, table),
                     f"mix({e1.name},{e2.name},{lam:g})")


def perception_of(model: DegradationModel, est: Estimator, kind) -> float:
    kind = DivergenceKind.parse(kind)
    out = output_distribution(model, est)
    if kind is DivergenceKind.WASSERSTEIN1:
        return w1_from_values(model.x_alphabet.scalar_values(), model.prior.weights,
                              out.alphabet.scalar_values(), out.weights)
    same_labels(out.alphabet, model.x_alphabet, "output and X alphabets")
    return divergence_vec(kind, model.prior.weights, out.weights)


@dataclass(frozen=True)
class MixtureReport:
    lam: float
    distortions: tuple
    perceptions: tuple
    distortion_mix: float
    perception_mix: float
    distortion_bound_ok: bool
    distortion_equality_gap: float
    perception_bound_ok: bool


def mixture_checks(model: DegradationModel, dist: DistortionMeasure, kind,
                   e1: Estimator, e2: Estimator, lam: float,
                   tol: float = 1e-10) -> MixtureReport:
    """Distortion is linear and perception convex along kernel mixtures."""
    em = mixture_estimator(e1, e2, lam)
    d1, d2, dm = (mean_distortion(model, e, dist) for e in (e1, e2, em))
    p1, p2, pm = (perception_of(model, e, kind) for e in (e1, e2, em))
    d_bound = lam * d1 + (1 - lam) * d2
    if math.isinf(p1) or math.isinf(p2):
        p_ok = True
    else:
        p_ok = pm <= lam * p1 + (1 - lam) * p2 + tol
    return MixtureReport(lam, (d1, d2), (p1, p2), dm, pm, dm <= d_bound + tol,
                         abs(dm - d_bound), bool(p_ok))


__all__ = [
    "SolverOptions", "TradeoffPoint", "TradeoffCurve", "ConstrainedResult",
    "lagrangian_solve", "trace_curve", "constrained_solve", "brute_force_oracle",
    "mixture_estimator", "mixture_checks", "MixtureReport", "perception_of",
    "lower_convex_envelope", "envelope_value", "default_lambdas", "curve_csv",
    "simplex_grid", "fmt",
]
