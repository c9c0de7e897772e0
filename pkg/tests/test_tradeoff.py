"""Lagrangian and constrained solvers, curves, envelopes and mixtures."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog, minimize
from scipy.special import rel_entr

from pdtradeoff.bounds import d_max, d_min
from pdtradeoff.divergence import DivergenceKind, divergence_vec
from pdtradeoff.errors import InfeasibleDistortion, TooLarge
from pdtradeoff.model import conditional_cost, mean_distortion, square_error_measure
from pdtradeoff.synthetic import random_estimator, random_model
from pdtradeoff.tradeoff import (SolverOptions, brute_force_oracle, constrained_solve,
                                 curve_csv, envelope_value, lagrangian_solve,
                                 lower_convex_envelope, mixture_estimator, perception_of,
                                 simplex_grid, trace_curve)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def setup(seed, nx=3, ny=3):
    m = random_model(np.random.default_rng(seed), nx, ny)
    sq = square_error_measure(m.x_alphabet)
    return m, sq, conditional_cost(m, sq), m.p_y, m.prior.weights


def lp_reference(m, sq, kind, D):
    """P(D) for TV or W1 as one linear program over the kernel q[y, k].

    TV uses slack variables t >= |p_X - r|; W1 adds a coupling between p_X
    and r with cost |x - x'|.
    """
    f, py, px = conditional_cost(m, sq), m.p_y, m.prior.weights
    ny, nk = f.shape
    nq = ny * nk
    r_of_q = np.zeros((nk, nq))           # r = p_Y @ q
    for y in range(ny):
        for k in range(nk):
            r_of_q[k, y * nk + k] = py[y]
    rows_eq, b_eq, rows_ub, b_ub = [], [], [], []
    if kind == "tv":
        nv = nq + nk
        c = np.concatenate((np.zeros(nq), 0.5 * np.ones(nk)))
        for k in range(nk):
            for sign in (1, -1):          # sign * (p_x - r) <= t
                row = np.zeros(nv)
                row[:nq] = sign * r_of_q[k]
                row[nq + k] = -1
                rows_ub.append(row)
                b_ub.append(sign * px[k])
    else:
        v = m.x_alphabet.scalar_values()
        cost = np.abs(v[:, None] - v[None, :]).ravel()
        nv = nq + nk * nk
        c = np.concatenate((np.zeros(nq), cost))
        for i in range(nk):               # coupling rows: sum_j pi[i, j] = p_x[i]
            row = np.zeros(nv)
            row[nq + i * nk:nq + (i + 1) * nk] = 1
            rows_eq.append(row)
            b_eq.append(px[i])
        for j in range(nk):               # coupling columns equal r
            row = np.zeros(nv)
            row[nq + j:nq + nk * nk:nk] = 1
            row[:nq] -= r_of_q[j]
            rows_eq.append(row)
            b_eq.append(0.0)
    for y in range(ny):
        row = np.zeros(nv)
        row[y * nk:(y + 1) * nk] = 1
        rows_eq.append(row)
        b_eq.append(1.0)
    row = np.zeros(nv)
    row[:nq] = (py[:, None] * f).ravel()
    rows_ub.append(row)
    b_ub.append(D)
    res = linprog(c, A_ub=np.array(rows_ub), b_ub=b_ub, A_eq=np.array(rows_eq), b_eq=b_eq,
                  bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun


def slsqp_reference(m, sq, kind, D, starts=12, seed=0):
    """Multi-start SLSQP on the constrained problem (smooth kinds)."""
    f, py, px = conditional_cost(m, sq), m.p_y, m.prior.weights
    ny, nk = f.shape
    kd = DivergenceKind.parse(kind)

    def obj(z):
        r = py @ z.reshape(ny, nk)
        return divergence_vec(kd, px, np.maximum(r, 1e-300))

    cons = [{"type": "eq", "fun": lambda z: z.reshape(ny, nk).sum(axis=1) - 1},
            {"type": "ineq", "fun": lambda z: D - py @ (f * z.reshape(ny, nk)).sum(axis=1)}]
    rng = np.random.default_rng(seed)
    best = math.inf
    for _ in range(starts):
        z0 = rng.dirichlet(np.ones(nk), ny).ravel()
        res = minimize(obj, z0, method="SLSQP", bounds=[(0, 1)] * (ny * nk),
                       constraints=cons, options={"ftol": 1e-14, "maxiter": 1000})
        q = np.clip(res.x.reshape(ny, nk), 0, None)
        q /= q.sum(axis=1, keepdims=True)
        if py @ (f * q).sum(axis=1) <= D + 1e-9:
            best = min(best, obj(q.ravel()))
    return best


class TestLagrangian:
    @pytest.mark.parametrize("kind", ["tv", "kl", "js", "hellinger", "chi2", "w1"])
    def test_beats_random_kernels(self, kind):
        rng = np.random.default_rng(11)
        m, sq, f, py, px = setup(11, 3, 4)
        lam = 0.7
        pt = lagrangian_solve(m, sq, kind, lam)
        assert pt.converged
        ours = pt.distortion + lam * pt.perception
        for _ in range(200):
            est = random_estimator(rng, m)
            other = mean_distortion(m, est, sq) + lam * perception_of(m, est, kind)
            assert ours <= other + 1e-6

    @given(seeds)
    def test_zero_multiplier_attains_d_min(self, seed):
        m, sq, *_ = setup(seed)
        pt = lagrangian_solve(m, sq, "kl", 0.0)
        assert pt.distortion == pytest.approx(d_min(m, sq).value, abs=1e-12)

    def test_negative_multiplier(self):
        m, sq, *_ = setup(0)
        with pytest.raises(ValueError):
            lagrangian_solve(m, sq, "kl", -1.0)

    @pytest.mark.parametrize("kind", ["kl", "hellinger"])
    def test_harmonic_step_agrees(self, kind):
        m, sq, *_ = setup(2)
        fast = lagrangian_solve(m, sq, kind, 1.0)
        slow = lagrangian_solve(m, sq, kind, 1.0, SolverOptions(step="harmonic",
                                                                max_iters=20000, tol=1e-4))
        assert (slow.distortion + slow.perception) == pytest.approx(
            fast.distortion + fast.perception, abs=1e-4)

    def test_tv_subgradient_agrees(self):
        m, sq, *_ = setup(3)
        exact = lagrangian_solve(m, sq, "tv", 0.5)
        sub = lagrangian_solve(m, sq, "tv", 0.5, SolverOptions(tv_method="subgradient"))
        assert sub.distortion + 0.5 * sub.perception == pytest.approx(
            exact.distortion + 0.5 * exact.perception, abs=1e-3)


class TestConstrained:
    @given(seeds, st.sampled_from(["tv", "w1"]), st.floats(0.05, 0.95))
    def test_transport_kinds_match_lp(self, seed, kind, frac):
        m, sq, *_ = setup(seed)
        lo, hi = d_min(m, sq).value, d_max(m, sq).value
        D = lo + frac * (hi - lo)
        ours = constrained_solve(m, sq, kind, D)
        assert ours.distortion <= D + 1e-9
        assert ours.perception == pytest.approx(lp_reference(m, sq, kind, D), abs=1e-6)

    @pytest.mark.parametrize("kind", ["kl", "js", "hellinger", "chi2"])
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_smooth_kinds_match_slsqp(self, kind, seed):
        m, sq, *_ = setup(seed, 2 + seed % 2, 3)
        lo, hi = d_min(m, sq).value, d_max(m, sq).value
        D = lo + 0.4 * (hi - lo)
        ours = constrained_solve(m, sq, kind, D)
        ref = slsqp_reference(m, sq, kind, D)
        assert ours.distortion <= D + 1e-9
        assert ours.perception <= ref + 1e-5
        assert ours.perception == pytest.approx(ref, abs=1e-4)

    @given(seeds, st.floats(0.1, 0.9), st.sampled_from([0.3, 3.0]))
    def test_weak_duality(self, seed, frac, lam):
        # for every lam: P(D) >= (L*(lam) - D) / lam
        m, sq, *_ = setup(seed)
        lo, hi = d_min(m, sq).value, d_max(m, sq).value
        D = lo + frac * (hi - lo)
        pt = lagrangian_solve(m, sq, "kl", lam)
        lagr = pt.distortion + lam * pt.perception - pt.duality_gap
        assert constrained_solve(m, sq, "kl", D).perception >= (lagr - D) / lam - 1e-6

    def test_endpoints(self):
        m, sq, *_ = setup(4)
        lo, hi = d_min(m, sq).value, d_max(m, sq).value
        assert constrained_solve(m, sq, "kl", hi + 1.0).perception == 0.0
        assert constrained_solve(m, sq, "tv", hi).perception == pytest.approx(0.0, abs=1e-12)
        with pytest.raises(InfeasibleDistortion):
            constrained_solve(m, sq, "kl", lo - 1e-3)

    @given(seeds)
    def test_monotone_in_d(self, seed):
        m, sq, *_ = setup(seed)
        lo, hi = d_min(m, sq).value, d_max(m, sq).value
        vals = [constrained_solve(m, sq, "tv", lo + t * (hi - lo)).perception
                for t in (0.1, 0.4, 0.7, 1.0)]
        assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))


class TestCurves:
    @given(seeds, st.sampled_from(["tv", "kl", "hellinger"]))
    def test_monotone_along_schedule(self, seed, kind):
        m, sq, *_ = setup(seed, 3, 4)
        curve = trace_curve(m, sq, kind, [0.01, 0.1, 1, 10, 100], endpoints=False)
        pts = sorted(curve.points, key=lambda p: p.lam)
        d = [p.distortion for p in pts]
        p = [p.perception for p in pts]
        assert all(b >= a - 1e-6 for a, b in zip(d, d[1:]))
        assert all(b <= a + 1e-6 for a, b in zip(p, p[1:]))

    def test_endpoints_span_bounds(self):
        m, sq, *_ = setup(5)
        curve = trace_curve(m, sq, "kl", [0.1, 1.0])
        ds = [p.distortion for p in curve.points]
        assert min(ds) == pytest.approx(d_min(m, sq).value, abs=1e-12)
        assert max(ds) == pytest.approx(d_max(m, sq).value, abs=1e-12)
        assert curve.perception_at(max(ds)) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("lams", [[1.0], [1.0, 0.5], [-1.0, 1.0]])
    def test_bad_schedules(self, lams):
        m, sq, *_ = setup(0)
        with pytest.raises(ValueError):
            trace_curve(m, sq, "kl", lams)

    def test_csv_and_flags(self):
        m, sq, *_ = setup(6, 4, 5)
        good = curve_csv(trace_curve(m, sq, "kl", [0.1, 1.0], endpoints=False))
        assert good.splitlines()[0] == "lambda,distortion,perception,gap"
        assert len(good.splitlines()) == 3
        rough = trace_curve(m, sq, "kl", [0.1, 1.0, 10.0], SolverOptions(max_iters=1),
                            endpoints=False)
        assert rough.flagged
        text = curve_csv(rough)
        assert text.splitlines()[0].endswith(",flagged")
        assert all(line.endswith((",0", ",1")) for line in text.splitlines()[1:])

    def test_csv_is_deterministic(self):
        m, sq, *_ = setup(7)
        a = curve_csv(trace_curve(m, sq, "kl", [0.1, 1.0, 10.0]))
        b = curve_csv(trace_curve(m, sq, "kl", [0.1, 1.0, 10.0]))
        assert a == b


points = st.lists(st.tuples(st.floats(0, 10), st.floats(0, 10)), min_size=1, max_size=30)


class TestEnvelope:
    @given(points)
    def test_below_points_convex_and_nonincreasing(self, pts):
        hull = lower_convex_envelope(pts)
        for d, p in pts:
            assert envelope_value(hull, d) <= p + 1e-9
        ys = [v[1] for v in hull]
        assert all(b <= a for a, b in zip(ys, ys[1:]))
        for (x0, y0), (x1, y1), (x2, y2) in zip(hull, hull[1:], hull[2:]):
            assert (y1 - y0) * (x2 - x1) <= (y2 - y1) * (x1 - x0) + 1e-9

    def test_vertices_are_input_points(self):
        pts = [(0, 5), (1, 2), (2, 1.8), (3, 0), (4, 0)]
        assert set(lower_convex_envelope(pts)) <= set(map(lambda t: tuple(map(float, t)), pts))
        assert envelope_value(lower_convex_envelope(pts), -1) == math.inf

    def test_infinite_points_are_skipped(self):
        hull = lower_convex_envelope([(0.0, math.inf), (1.0, 1.0), (2.0, 0.0)])
        assert hull == [(1.0, 1.0), (2.0, 0.0)]


class TestOracleAndMixtures:
    def test_grid_size(self):
        assert len(simplex_grid(3, 5)) == math.comb(4 + 2, 2)

    def test_oracle_upper_bounds_solver(self):
        m, sq, *_ = setup(8, 2, 2)
        lo, hi = d_min(m, sq).value, d_max(m, sq).value
        D = 0.5 * (lo + hi)
        for kind in ("tv", "kl"):
            ours = constrained_solve(m, sq, kind, D).perception
            coarse = brute_force_oracle(m, sq, kind, D)
            fine = brute_force_oracle(m, sq, kind, D, refine=4)
            assert ours <= fine + 1e-6 and fine <= coarse + 1e-15
            assert fine - ours <= 5e-3

    def test_oracle_size_limit(self):
        m = random_model(np.random.default_rng(0), 4, 5)
        with pytest.raises(TooLarge):
            brute_force_oracle(m, square_error_measure(m.x_alphabet), "tv", 1.0)

    def test_mixture_endpoints_and_range(self):
        rng = np.random.default_rng(9)
        m = random_model(rng, 3, 3)
        a, b = random_estimator(rng, m), random_estimator(rng, m)
        assert mixture_estimator(a, b, 1.0) is a
        assert mixture_estimator(a, b, 0.0) is b
        with pytest.raises(ValueError):
            mixture_estimator(a, b, 1.5)
