from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cvarbandits.dist import (
    DiscreteDist, cdf_sup_distance, cvar, cvar_batch, cvar_sup_oracle, empirical_cvar,
    empirical_cvar_batch, levy_distance, sup_distance,
)
from oracles import cvar_max_form, cvar_sorted_samples

ALPHAS = (0.05, 0.2, 0.5, 0.9, 1.0)


def random_dist(rng, max_size=8, grid=None):
    m = int(rng.integers(1, max_size + 1))
    if grid is None:
        x = rng.uniform(0, 1, m)
    else:
        x = rng.choice(grid, m, replace=False)
    return DiscreteDist(x, rng.dirichlet(np.ones(m)))


@st.composite
def dists(draw, max_size=8):
    m = draw(st.integers(1, max_size))
    x = draw(st.lists(st.floats(0, 1, allow_nan=False), min_size=m, max_size=m, unique=True))
    w = np.array(draw(st.lists(st.floats(0.001, 1.0), min_size=m, max_size=m)))
    return DiscreteDist(x, w / w.sum())


class TestConstruction:
    def test_sorts_and_merges_duplicates(self):
        d = DiscreteDist([1.0, 0.0, 1.0], [0.25, 0.5, 0.25])
        assert d.support.tolist() == [0.0, 1.0]
        assert d.weights.tolist() == [0.5, 0.5]

    def test_renormalizes_small_drift(self):
        d = DiscreteDist([0, 1], [0.5, 0.5 + 5e-10])
        assert d.weights.sum() == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("w", [[0.5, 0.4], [1.1, -0.1], [np.nan, 1.0]])
    def test_rejects_bad_weights(self, w):
        with pytest.raises(ValueError):
            DiscreteDist([0, 1], w)

    def test_bound_enforced(self):
        with pytest.raises(ValueError):
            DiscreteDist([0, 2], [0.5, 0.5], bound=1.0)

    def test_immutable(self):
        d = DiscreteDist([0, 1], [0.5, 0.5])
        with pytest.raises(ValueError):
            d.weights[0] = 1.0

    def test_zero_weight_points_are_kept(self):
        assert len(DiscreteDist([0, 0.5, 1], [0.5, 0.0, 0.5])) == 3


class TestCvar:
    @pytest.mark.parametrize("alpha", ALPHAS)
    def test_dirac(self, alpha):
        assert cvar(DiscreteDist.dirac(0.7), alpha) == 0.7

    def test_examples(self):
        assert cvar(DiscreteDist([0, 1], [0.5, 0.5]), 0.5) == 0.0
        assert cvar(DiscreteDist([0, 1], [0.25, 0.75]), 0.5) == pytest.approx(0.5, abs=1e-15)
        assert cvar_sup_oracle(DiscreteDist([0, 1], [0.5, 0.5]), 0.5) == 0.0
        assert cvar_sup_oracle(DiscreteDist.dirac(0.7), 0.2) == 0.7
        assert cvar_sup_oracle(DiscreteDist([0, 0.5, 1], [1 / 3] * 3), 1.0) == pytest.approx(0.5)

    def test_alpha_one_is_mean(self, gen):
        for _ in range(200):
            d = random_dist(gen)
            assert cvar(d, 1.0) == pytest.approx(d.mean, abs=1e-12)

    def test_rejects_bad_alpha(self):
        d = DiscreteDist([0, 1], [0.5, 0.5])
        for a in (0.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                cvar(d, a)

    def test_matches_external_oracle(self, gen):
        for _ in range(300):
            d = random_dist(gen)
            for a in ALPHAS:
                ref = cvar_max_form(d.support, d.weights, a)[0]
                assert abs(cvar(d, a) - ref) <= 1e-12

    @settings(max_examples=300, deadline=None)
    @given(dists(), st.sampled_from(ALPHAS))
    def test_sup_oracle_agreement(self, d, alpha):
        assert abs(cvar(d, alpha) - cvar_sup_oracle(d, alpha)) <= 1e-12

    @settings(max_examples=200, deadline=None)
    @given(dists(), st.floats(0.01, 1.0), st.floats(0.01, 1.0))
    def test_monotone_in_alpha(self, d, a1, a2):
        a1, a2 = sorted((a1, a2))
        assert cvar(d, a1) <= cvar(d, a2) + 1e-12

    @settings(max_examples=200, deadline=None)
    @given(dists(), st.sampled_from(ALPHAS), st.floats(0.1, 10.0))
    def test_positive_homogeneity(self, d, alpha, lam):
        assert cvar(d.scaled(lam), alpha) == pytest.approx(lam * cvar(d, alpha), rel=1e-12, abs=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(dists(), st.sampled_from(ALPHAS))
    def test_loss_symmetry(self, d, alpha):
        # reward CVaR equals B minus the loss CVaR (upper tail mean) of B - X
        B = 1.0
        flipped = DiscreteDist(B - d.support, d.weights)
        # loss CVaR of B - X is the mean of its top alpha tail
        xs, ws = flipped.support[::-1], flipped.weights[::-1]
        rem, acc = alpha, 0.0
        for x, w in zip(xs, ws):
            take = min(w, rem)
            acc += take * x
            rem -= take
            if rem <= 0:
                break
        acc += max(rem, 0.0) * xs[-1]
        assert cvar(d, alpha) == pytest.approx(B - acc / alpha, abs=1e-9)

    def test_linf_comparison(self, gen):
        for _ in range(1000):
            m = int(gen.integers(2, 7))
            x = np.sort(gen.uniform(0, 1, m))
            p = DiscreteDist(x, gen.dirichlet(np.ones(m)))
            q = DiscreteDist(x, gen.dirichlet(np.ones(m)))
            a = float(gen.choice(ALPHAS))
            lhs = abs(cvar(p, a) - cvar(q, a))
            assert lhs <= m * sup_distance(p, q) * x[-1] / a + 1e-12

    def test_batch_matches_scalar(self, gen):
        x = np.linspace(0, 1, 6)
        W = gen.dirichlet(np.ones(6), 100)
        for a in ALPHAS:
            ref = [cvar(DiscreteDist(x, w), a) for w in W]
            np.testing.assert_allclose(cvar_batch(x, W, a), ref, atol=1e-12)


class TestEmpirical:
    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=40), st.floats(0.01, 1.0))
    def test_matches_quantile_integral(self, s, alpha):
        assert empirical_cvar(s, alpha) == pytest.approx(cvar_sorted_samples(s, alpha), abs=1e-12)

    def test_batch(self, gen):
        S = gen.uniform(size=(50, 17))
        for a in ALPHAS:
            np.testing.assert_allclose(empirical_cvar_batch(S, a),
                                       [cvar_sorted_samples(r, a) for r in S], atol=1e-12)


class TestDistances:
    def test_sup_distance_examples(self):
        a = DiscreteDist([0, 1], [0.5, 0.5])
        assert sup_distance(a, a) == 0
        assert sup_distance(DiscreteDist([0, 1], [1, 0]), DiscreteDist([0, 1], [0, 1])) == 1
        assert sup_distance(a, DiscreteDist([0, 1], [0.25, 0.75])) == pytest.approx(0.25)

    def test_sup_distance_mismatched(self):
        with pytest.raises(ValueError):
            sup_distance(DiscreteDist([0, 1], [0.5, 0.5]), DiscreteDist([0, 2], [0.5, 0.5]))

    def test_levy_examples(self):
        a = DiscreteDist([0.2, 0.6], [0.3, 0.7])
        assert levy_distance(a, a) == 0.0
        assert levy_distance(DiscreteDist.dirac(0.0), DiscreteDist.dirac(0.3)) == pytest.approx(0.3, abs=1e-8)

    def test_levy_bounded_by_kolmogorov(self, gen):
        grid = np.linspace(0, 1, 11)
        for _ in range(300):
            a, b = random_dist(gen, 5, grid), random_dist(gen, 5, grid)
            assert levy_distance(a, b) <= cdf_sup_distance(a, b) + 1e-8

    def test_levy_symmetric(self, gen):
        for _ in range(100):
            a, b = random_dist(gen, 4), random_dist(gen, 4)
            assert levy_distance(a, b) == pytest.approx(levy_distance(b, a), abs=2e-9)
