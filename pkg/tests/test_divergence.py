"""Divergences, the discriminator identity and distribution alignment."""

import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given
from hypothesis import strategies as st

from pdtradeoff.divergence import (DivergenceKind, align, chi_square, compare, divergence,
                                   hellinger, js, kl, mean_quality_identity,
                                   smoothed_value_and_grad, success_probability, tv,
                                   w1_from_values, wasserstein1)
from pdtradeoff.errors import AlphabetMismatch, MissingValues
from pdtradeoff.model import Alphabet, DiscreteDistribution

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def pair(seed, k=None, zeros=False):
    rng = np.random.default_rng(seed)
    k = k or int(rng.integers(2, 10))
    p, q = rng.dirichlet(np.ones(k)), rng.dirichlet(np.ones(k))
    if zeros:
        p[rng.integers(k)] = 0.0
        p /= p.sum()
    return p, q


class TestFormulas:
    @given(seeds, st.booleans())
    def test_nonnegative_and_zero_on_diagonal(self, seed, zeros):
        p, q = pair(seed, zeros=zeros)
        for fn in (tv, kl, js, hellinger, chi_square):
            assert fn(p, q) >= -1e-15
            assert fn(p, p) == pytest.approx(0.0, abs=1e-15)

    @given(seeds)
    def test_kl_matches_scipy(self, seed):
        p, q = pair(seed)
        assert kl(p, q) == pytest.approx(scipy.stats.entropy(p, q), rel=1e-12)

    @given(seeds)
    def test_js_matches_scipy(self, seed):
        from scipy.spatial.distance import jensenshannon
        p, q = pair(seed)
        assert js(p, q) == pytest.approx(jensenshannon(p, q) ** 2, rel=1e-9, abs=1e-15)

    @given(seeds)
    def test_standard_inequalities(self, seed):
        p, q = pair(seed)
        t = tv(p, q)
        assert t <= 1.0
        assert kl(p, q) >= 2 * t * t - 1e-15          # Pinsker
        assert kl(p, q) <= math.log1p(chi_square(p, q)) + 1e-12
        assert hellinger(p, q) <= t + 1e-15
        assert js(p, q) <= math.log(2) + 1e-15

    def test_infinite_values(self):
        p, q = np.array([0.5, 0.5]), np.array([1.0, 0.0])
        assert kl(p, q) == math.inf
        assert chi_square(p, q) == math.inf
        assert js(p, q) < math.log(2)

    @given(seeds)
    def test_smoothed_gradient_matches_finite_difference(self, seed):
        p, q = pair(seed, k=4)
        q = 0.5 * q + 0.125
        for kind in (DivergenceKind.KL, DivergenceKind.JS, DivergenceKind.HELLINGER,
                     DivergenceKind.CHI_SQUARE):
            val, grad = smoothed_value_and_grad(kind, p, q)
            h = 1e-6
            for i in range(4):
                e = np.zeros(4)
                e[i] = h
                fd = (smoothed_value_and_grad(kind, p, q + e)[0]
                      - smoothed_value_and_grad(kind, p, q - e)[0]) / (2 * h)
                assert grad[i] == pytest.approx(fd, rel=1e-5, abs=1e-7)


class TestDistributionLevel:
    @given(seeds)
    def test_success_probability(self, seed):
        p, q = pair(seed)
        a = Alphabet(tuple(f"s{i}" for i in range(len(p))))
        pp, qq = DiscreteDistribution(a, p), DiscreteDistribution(a, q)
        # brute force: best discriminator says "real" where p > q
        brute = 0.5 * p[p > q].sum() + 0.5 * q[p <= q].sum()
        assert success_probability(pp, qq) == pytest.approx(brute, abs=1e-15)

    def test_mismatched_alphabets(self):
        p = DiscreteDistribution(Alphabet(("a", "b")), [0.5, 0.5])
        q = DiscreteDistribution(Alphabet(("a", "c")), [0.5, 0.5])
        with pytest.raises(AlphabetMismatch):
            divergence("kl", p, q)

    @given(seeds)
    def test_w1_matches_scipy(self, seed):
        rng = np.random.default_rng(seed)
        u, v = rng.normal(size=5), rng.normal(size=3)
        wu, wv = rng.dirichlet(np.ones(5)), rng.dirichlet(np.ones(3))
        ref = scipy.stats.wasserstein_distance(u, v, wu, wv)
        assert w1_from_values(u, wu, v, wv) == pytest.approx(ref, rel=1e-10, abs=1e-14)

    def test_w1_needs_values(self):
        p = DiscreteDistribution(Alphabet(("a", "b")), [0.5, 0.5])
        with pytest.raises(MissingValues):
            wasserstein1(p, p)

    @given(seeds)
    def test_quality_identity(self, seed):
        p, q = pair(seed)
        a = Alphabet(tuple(f"s{i}" for i in range(len(p))))
        rep = mean_quality_identity(DiscreteDistribution(a, p), DiscreteDistribution(a, q))
        assert abs(rep.residual) <= 1e-12
        assert rep.residual_as_printed == pytest.approx(-2 * rep.entropy, rel=1e-9)

    def test_align_merges_equal_values(self):
        p = DiscreteDistribution(Alphabet.from_values([0.0, 1.0]), [0.25, 0.75])
        q = DiscreteDistribution(Alphabet.from_values([1.0, 2.0]), [0.5, 0.5])
        a, b = align(p, q)
        assert a.alphabet.labels == ("0.0", "1.0", "2.0")
        np.testing.assert_allclose(a.weights, [0.25, 0.75, 0.0])
        np.testing.assert_allclose(b.weights, [0.0, 0.5, 0.5])

    def test_compare_on_shared_support(self):
        p = DiscreteDistribution(Alphabet.from_values([0.0, 1.0]), [0.25, 0.75])
        q = DiscreteDistribution(Alphabet.from_values([0.0, 1.0]), [0.5, 0.5])
        assert compare("tv", p, q) == pytest.approx(0.25)
        assert compare("w1", p, q) == pytest.approx(0.25)

    def test_parse_aliases(self):
        assert DivergenceKind.parse("Total-Variation") is DivergenceKind.TV
        assert DivergenceKind.parse("chi_square") is DivergenceKind.CHI_SQUARE
        with pytest.raises(ValueError):
            DivergenceKind.parse("renyi")
