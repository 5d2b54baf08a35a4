from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from cvarbandits import policies as pol
from cvarbandits.dist import empirical_cvar
from cvarbandits.rng import RngStream
from oracles import cvar_sorted_samples


def index_draws(fn, n):
    return np.array([fn() for _ in range(n)])


class TestMcvtsIndex:
    def test_single_point(self):
        g = RngStream(1)
        assert {pol.mcvts_index([0.4], [3.0], 0.3, g) for _ in range(50)} == {0.4}

    def test_flat_prior_mean(self):
        g = RngStream(2)
        v = index_draws(lambda: pol.mcvts_index([0.0, 1.0], [1.0, 1.0], 1.0, g), 100_000)
        assert abs(v.mean() - 0.5) <= 0.01

    @pytest.mark.parametrize("alpha", [0.1, 0.5, 1.0])
    def test_concentrates(self, alpha):
        # frozen oracle frequency is 1.0 (tests/oracles.py: mcvts_concentration)
        g = RngStream(3)
        v = index_draws(lambda: pol.mcvts_index([0.0, 0.3, 1.0], [1.0, 10_001.0, 1.0], alpha, g), 1000)
        assert np.mean(np.abs(v - 0.3) <= 0.05) >= 0.99

    def test_alpha_one_is_mean_thompson(self):
        g, h = RngStream(4), RngStream(5)
        beta = np.array([3.0, 5.0])
        a = index_draws(lambda: pol.mcvts_index([0.0, 1.0], beta, 1.0, g), 50_000)
        b = h.generator.dirichlet(beta, 50_000)[:, 1]
        assert stats.ks_2samp(a, b).pvalue >= 0.001


class TestBcvtsIndex:
    def test_fresh_arm(self):
        g = RngStream(1)
        assert {pol.bcvts_index([0.8], 0.2, g) for _ in range(50)} == {0.8}

    def test_two_point_mean(self):
        g = RngStream(2)
        v = index_draws(lambda: pol.bcvts_index([0.0, 1.0], 1.0, g), 100_000)
        assert abs(v.mean() - 0.5) <= 0.01

    def test_low_tail_sample(self):
        # frozen oracle frequency is 1.0 (tests/oracles.py: bcvts_frequency)
        g = RngStream(3)
        x = np.array([0.2] * 50 + [1.0])
        v = index_draws(lambda: pol.bcvts_index(x, 0.1, g), 1000)
        assert np.mean(v <= 0.5) >= 0.95


class TestUcbIndices:
    def test_uucb_formula(self):
        got = pol.uucb_index(0.3, 10, 100, 0.25, upper=2.0, c=2.0)
        assert got == pytest.approx(0.3 + (2.0 / 0.25) * math.sqrt(2 * math.log(100) / 20))
        with pytest.raises(ValueError):
            pol.uucb_index(0.3, 0, 100, 0.25)

    def test_cvarucb_hand_trace(self):
        eps = math.sqrt(math.log(512) / 8)
        assert pol.dkw_radius(16, 4) == pytest.approx(eps)
        assert eps == pytest.approx(0.8831, abs=1e-4)
        got = pol.cvarucb_index([0.2, 0.4, 0.6, 0.8], 16, 1.0, upper=1.0)
        assert got == pytest.approx((1 - eps) * 0.8 + eps * 1.0, abs=1e-12)
        assert got == pytest.approx(0.9766, abs=1e-4)

    def test_cvarucb_limits(self):
        assert pol.cvarucb_index([0.1, 0.2], 1e6, 0.5, upper=1.0) == 1.0
        x = np.sort(RngStream(1).random(10**6))
        assert pol.cvarucb_index(x, 2, 0.3, 1.0) == pytest.approx(empirical_cvar(x, 0.3), abs=5e-3)

    def test_cvarucb_matches_brute_force(self):
        g = np.random.default_rng(3)
        for _ in range(200):
            n = int(g.integers(1, 30))
            x = np.sort(g.uniform(0, 1, n))
            t = float(g.integers(2, 10_000))
            a = float(g.choice([0.05, 0.3, 1.0]))
            eps = min(1.0, math.sqrt(math.log(2 * t * t) / (2 * n)))
            # optimistic law as weights on x plus an atom at 1, via removal from the bottom
            w = np.full(n, 1.0 / n)
            rem = eps
            for i in range(n):
                take = min(w[i], rem)
                w[i] -= take
                rem -= take
            support = np.append(x, 1.0)
            weights = np.append(w, 1.0 - w.sum())
            # quantile-integral oracle on the optimistic CDF
            order = np.argsort(support, kind="stable")
            s, p = support[order], weights[order]
            acc, left = 0.0, a
            for v, m in zip(s, p):
                take = min(m, left)
                acc += take * v
                left -= take
            assert pol.cvarucb_index(x, t, a, 1.0) == pytest.approx(acc / a, abs=1e-12)


class TestPolicyStep:
    class Fixed:
        def __init__(self, v):
            self.v = np.asarray(v, dtype=float)

        def indices(self, t, rng):
            return self.v

    def test_single_arm(self):
        assert pol.policy_step(self.Fixed([0.3]), 1, RngStream(1)) == 0

    def test_strict_argmax(self):
        assert pol.policy_step(self.Fixed([0.1, 0.9, 0.3]), 1, RngStream(1)) == 1

    def test_uniform_ties(self):
        g = RngStream(2)
        picks = np.array([pol.policy_step(self.Fixed([0.5] * 4), 1, g) for _ in range(10_000)])
        np.testing.assert_allclose(np.bincount(picks, minlength=4) / 10_000, 0.25, atol=0.02)


class TestBrown:
    def test_values(self):
        up, lo = pol.brown_upper_bound(1, 1.0, 1.0, 1.0)
        assert up == pytest.approx(3 * math.exp(-0.2))
        assert up == pytest.approx(2.4562, abs=1e-4)
        assert lo == pytest.approx(math.exp(-2))

    def test_limits_and_scaling(self):
        up, lo = pol.brown_upper_bound(10, 0.5, 1e3, 1.0)
        assert up == 0.0 and lo == 0.0
        u1, l1 = pol.brown_upper_bound(10, 0.5, 0.3, 1.0)
        u2, l2 = pol.brown_upper_bound(20, 0.5, 0.3, 1.0)
        assert u2 / 3 == pytest.approx((u1 / 3) ** 2) and l2 == pytest.approx(l1**2)

    def test_rejects(self):
        with pytest.raises(ValueError):
            pol.brown_upper_bound(0, 0.5, 0.1)


def play(policy, arms_support, arms_weights, T, seed, scale=1.0):
    rng = RngStream(seed, 1)
    arm_rngs = [RngStream(seed, 10 + k) for k in range(len(arms_support))]
    chosen = []
    for t in range(1, T + 1):
        a = policy.select(t, rng)
        j = np.searchsorted(np.cumsum(arms_weights[a]), arm_rngs[a].random(), side="right")
        policy.update(a, scale * arms_support[a][min(j, len(arms_support[a]) - 1)])
        chosen.append(a)
    return chosen


class TestPolicies:
    sup = [np.array([0.0, 0.5, 1.0]), np.array([0.0, 0.5, 1.0]), np.array([0.0, 0.5, 1.0])]
    w = [np.array([0.3, 0.3, 0.4]), np.array([0.1, 0.5, 0.4]), np.array([0.5, 0.0, 0.5])]

    def test_mcvts_counts_invariant(self):
        p = pol.McvtsPolicy(self.sup, 0.5)
        ch = play(p, self.sup, self.w, 500, 1)
        np.testing.assert_array_equal(p.pulls(), np.bincount(ch, minlength=3))

    def test_mcvts_rejects_off_support(self):
        p = pol.McvtsPolicy(self.sup, 0.5)
        with pytest.raises(ValueError):
            p.update(0, 0.25)

    def test_bcvts_history_invariant(self):
        p = pol.BcvtsPolicy([1.0, 1.0, 1.0], 0.5)
        ch = play(p, self.sup, self.w, 500, 2)
        counts = np.bincount(ch, minlength=3)
        for k in range(3):
            assert p.observations[k].size == counts[k] + 1
            assert p.observations[k][-1] == 1.0 and np.all(np.diff(p.observations[k]) >= 0)

    def test_ucb_round_robin_start(self):
        for cls in (pol.UUcbPolicy, pol.CvarUcbPolicy):
            p = cls(3, 0.5)
            assert play(p, self.sup, self.w, 3, 3) == [0, 1, 2]
            assert p.counts().sum() == 3

    def test_clamping(self, caplog):
        p = pol.BcvtsPolicy([0.5], 0.5)
        p.update(0, 0.9)
        p.update(0, -0.1)
        assert p.n_clamped == 2 and p.observations[0].tolist() == [0.0, 0.5, 0.5]
        assert "clamping" in caplog.text

    @pytest.mark.parametrize("scale", [2.0, 0.5, 4.0])
    def test_scale_equivariance(self, scale):
        sup_s = [s * scale for s in self.sup]
        for make in (lambda s, sc: pol.McvtsPolicy(s, 0.3),
                     lambda s, sc: pol.BcvtsPolicy([sc] * 3, 0.3),
                     lambda s, sc: pol.UUcbPolicy(3, 0.3, upper=sc),
                     lambda s, sc: pol.CvarUcbPolicy(3, 0.3, upper=sc)):
            a = play(make(self.sup, 1.0), self.sup, self.w, 300, 4)
            b = play(make(sup_s, scale), sup_s, self.w, 300, 4)
            assert a == b

    def test_uniform_policy(self):
        p = pol.UniformPolicy(4)
        g = RngStream(1)
        picks = np.array([p.select(t, g) for t in range(1, 20_001)])
        np.testing.assert_allclose(np.bincount(picks) / picks.size, 0.25, atol=0.02)


class TestConcentration:
    @pytest.mark.parametrize("n", [50, 200])
    def test_brown_tails(self, n):
        g = np.random.default_rng(n)
        alpha, eps, reps = 0.5, 0.2, 10_000
        c = 0.0  # CVaR_0.5 of Bernoulli(0.5)
        chat = np.array([empirical_cvar(g.binomial(1, 0.5, n), alpha) for _ in range(reps)])
        up_b, lo_b = pol.brown_upper_bound(n, alpha, eps, 1.0)
        for freq, bound in ((np.mean(chat <= c - eps), lo_b), (np.mean(chat >= c + eps), up_b)):
            se = math.sqrt(max(bound * (1 - bound), 0.0) / reps) if bound < 1 else 0.0
            assert freq <= bound + 3 * se


class TestReweighting:
    X = np.round(np.linspace(0.02, 0.97, 20) ** 1.5, 6)

    def test_bound_formula(self):
        assert pol.reweighting_lower_bound(self.X, 0.3) == pytest.approx(
            (self.X[5] - self.X[0]) / (25 * 20**3))

    def test_frequency_above_bound(self):
        freq = pol.reweighting_exceedance(self.X, 0.3, 100_000, RngStream(9))
        # frozen oracle frequency 0.585 (tests/oracles.py: reweighting_frequency)
        assert abs(freq - 0.585) <= 0.01
        assert freq >= pol.reweighting_lower_bound(self.X, 0.3)
        assert cvar_sorted_samples(self.X, 0.3) == pytest.approx(empirical_cvar(self.X, 0.3))
