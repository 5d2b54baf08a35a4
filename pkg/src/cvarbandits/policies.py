"""Bandit policies for the CVaR criterion.

All policies expose ``select(t, rng) -> arm`` and ``update(arm, reward)``.
Index policies compute one index per arm and play the argmax, breaking ties
uniformly at random with the policy's own stream.

Round ``t`` is 1-based.  The UCB bonuses are evaluated at ``t - 1``, the
number of rounds already played, which matches indexing the decision for
round ``t + 1`` by the history up to ``t``.
"""
from __future__ import annotations

import logging
import math
from typing import Protocol, Sequence

import numpy as np

from . import _backend
from .dist import check_alpha
from .rng import as_generator

log = logging.getLogger(__name__)

# codes understood by the compiled simulate() kernel
MCVTS, BCVTS, UUCB, CVARUCB, UNIFORM = range(5)


class Policy(Protocol):
    name: str
    n_arms: int

    def select(self, t: int, rng) -> int: ...

    def update(self, arm: int, reward: float) -> None: ...


# ---------------------------------------------------------------------------
# index functions

def mcvts_index(support, beta, alpha: float, rng) -> float:
    """CVaR of ``support`` under weights drawn from Dirichlet(``beta``)."""
    support = np.ascontiguousarray(support, dtype=np.float64)
    beta = np.ascontiguousarray(beta, dtype=np.float64)
    return _backend.kernels.mcvts_index(as_generator(rng), support, beta, alpha)


def bcvts_index(observations, alpha: float, rng) -> float:
    """CVaR of the ascending ``observations`` under a uniform random reweighting.

    ``observations`` must already contain the arm's upper bound.
    """
    x = np.ascontiguousarray(observations, dtype=np.float64)
    return _backend.kernels.bcvts_index(as_generator(rng), x, alpha)


def uucb_index(emp_cvar: float, n: int, t: float, alpha: float,
               upper: float = 1.0, c: float = 2.0) -> float:
    """Empirical CVaR plus ``(U / alpha) * sqrt(C log t / (2 n))``."""
    if n < 1:
        raise ValueError("U-UCB index needs at least one observation")
    return emp_cvar + _backend.kernels.uucb_bonus(float(t), float(n), alpha, upper, c)


def dkw_radius(t: float, n: int) -> float:
    """DKW band half-width at confidence 1 - 1/t^2, capped at 1."""
    return _backend.kernels.dkw_radius(float(t), float(n))


def cvarucb_index(observations, t: float, alpha: float, upper: float = 1.0) -> float:
    """CVaR of the optimistic empirical CDF.

    Mass ``dkw_radius(t, n)`` is taken greedily from the smallest
    observations and put on ``upper``.
    """
    x = np.ascontiguousarray(observations, dtype=np.float64)
    if x.size < 1:
        raise ValueError("CVaR-UCB index needs at least one observation")
    eps = dkw_radius(t, x.size)
    return _backend.kernels.cvar_optimistic(x, eps, upper, alpha)


def policy_step(policy, t: int, rng) -> int:
    """Argmax of ``policy.indices(t, rng)`` with uniform tie-breaking."""
    values = np.ascontiguousarray(policy.indices(t, rng), dtype=np.float64)
    return int(_backend.kernels.argmax_tiebreak(as_generator(rng), values))


def brown_upper_bound(n: int, alpha: float, epsilon: float, bound: float = 1.0) -> tuple[float, float]:
    """Deviation bounds for the empirical CVaR of ``n`` samples in [0, bound].

    Returns ``(upper, lower)``: bounds on P(c_hat >= c + eps) and
    P(c_hat <= c - eps).
    """
    if n < 1 or epsilon <= 0:
        raise ValueError("need n >= 1 and epsilon > 0")
    r = epsilon / bound
    upper = 3.0 * math.exp(-(alpha / 5.0) * r * r * n)
    lower = math.exp(-2.0 * (alpha * r) ** 2 * n)
    return upper, lower


# ---------------------------------------------------------------------------
# policies

def _insert(sorted_arr: np.ndarray, value: float) -> np.ndarray:
    pos = np.searchsorted(sorted_arr, value, side="right")
    return np.insert(sorted_arr, pos, value)


class _Clamp:
    n_clamped = 0

    def _clamp(self, reward: float, hi: float) -> float:
        if 0.0 <= reward <= hi:
            return reward
        if self.n_clamped == 0:
            log.warning("%s: reward %r outside [0, %r], clamping", getattr(self, "name", "?"), reward, hi)
        self.n_clamped += 1
        return 0.0 if reward < 0.0 else hi


class McvtsPolicy:
    """Multinomial Thompson Sampling on CVaR with known supports."""

    code = MCVTS

    def __init__(self, supports: Sequence, alpha: float, name: str = "M-CVTS"):
        self.alpha = check_alpha(alpha)
        self.name = name
        self.supports = [np.ascontiguousarray(s, dtype=np.float64) for s in supports]
        for s in self.supports:
            if s.size == 0 or np.any(np.diff(s) <= 0):
                raise ValueError("supports must be nonempty and strictly ascending")
        self.beta = [np.ones(s.size) for s in self.supports]
        self.n_arms = len(self.supports)

    def indices(self, t: int, rng) -> np.ndarray:
        return np.array([mcvts_index(s, b, self.alpha, rng)
                         for s, b in zip(self.supports, self.beta)])

    def select(self, t: int, rng) -> int:
        return policy_step(self, t, rng)

    def update(self, arm: int, reward: float) -> None:
        s = self.supports[arm]
        j = int(np.searchsorted(s, reward))
        if j >= s.size or s[j] != reward:
            raise ValueError(f"reward {reward} is not in the support of arm {arm}")
        self.beta[arm][j] += 1.0

    def pulls(self) -> np.ndarray:
        return np.array([b.sum() - b.size for b in self.beta])


class BcvtsPolicy(_Clamp):
    """Non-parametric Thompson Sampling on CVaR for arms bounded by ``bounds``."""

    code = BCVTS

    def __init__(self, bounds: Sequence[float], alpha: float, name: str = "B-CVTS"):
        self.alpha = check_alpha(alpha)
        self.name = name
        self.bounds = np.asarray(bounds, dtype=np.float64)
        self.observations = [np.array([b]) for b in self.bounds]
        self.n_arms = self.bounds.size

    def indices(self, t: int, rng) -> np.ndarray:
        return np.array([bcvts_index(x, self.alpha, rng) for x in self.observations])

    def select(self, t: int, rng) -> int:
        return policy_step(self, t, rng)

    def update(self, arm: int, reward: float) -> None:
        reward = self._clamp(reward, self.bounds[arm])
        self.observations[arm] = _insert(self.observations[arm], reward)


class _UcbBase(_Clamp):
    def __init__(self, n_arms: int, alpha: float, upper: float, name: str):
        self.alpha = check_alpha(alpha)
        self.upper = float(upper)
        self.name = name
        self.n_arms = int(n_arms)
        self.observations = [np.empty(0) for _ in range(self.n_arms)]

    def counts(self) -> np.ndarray:
        return np.array([x.size for x in self.observations])

    def select(self, t: int, rng) -> int:
        # one forced pull per arm, in order, before any index is used
        for k, x in enumerate(self.observations):
            if x.size == 0:
                return k
        return policy_step(self, t, rng)

    def update(self, arm: int, reward: float) -> None:
        reward = self._clamp(reward, self.upper)
        self.observations[arm] = _insert(self.observations[arm], reward)


class UUcbPolicy(_UcbBase):
    """Empirical CVaR plus a Brown-type confidence bonus."""

    code = UUCB

    def __init__(self, n_arms: int, alpha: float, upper: float = 1.0, c: float = 2.0,
                 name: str = "U-UCB"):
        super().__init__(n_arms, alpha, upper, name)
        self.c = float(c)
        self.emp = np.zeros(self.n_arms)

    def indices(self, t: int, rng) -> np.ndarray:
        return np.array([uucb_index(self.emp[k], x.size, t - 1, self.alpha, self.upper, self.c)
                         for k, x in enumerate(self.observations)])

    def update(self, arm: int, reward: float) -> None:
        super().update(arm, reward)
        self.emp[arm] = _backend.kernels.cvar_uniform(self.observations[arm], self.alpha)


class CvarUcbPolicy(_UcbBase):
    """CVaR of a DKW-optimistic empirical CDF."""

    code = CVARUCB

    def __init__(self, n_arms: int, alpha: float, upper: float = 1.0, name: str = "CVaR-UCB"):
        super().__init__(n_arms, alpha, upper, name)

    def indices(self, t: int, rng) -> np.ndarray:
        return np.array([cvarucb_index(x, t - 1, self.alpha, self.upper)
                         for x in self.observations])


class UniformPolicy:
    """Picks an arm uniformly at random every round."""

    code = UNIFORM

    def __init__(self, n_arms: int, name: str = "uniform"):
        self.n_arms = int(n_arms)
        self.name = name
        self.alpha = 1.0

    def select(self, t: int, rng) -> int:
        return int(as_generator(rng).random() * self.n_arms)

    def update(self, arm: int, reward: float) -> None:
        pass


# ---------------------------------------------------------------------------
# reweighting diagnostic

def reweighting_lower_bound(x, alpha: float) -> float:
    """Lower bound ``(x_(ceil(n alpha)) - x_(1)) / (25 n^3)`` for samples in [0, 1]."""
    x = np.sort(np.asarray(x, dtype=np.float64))
    n = x.size
    return float((x[math.ceil(n * alpha) - 1] - x[0]) / (25.0 * n**3))


def reweighting_exceedance(x, alpha: float, n_draws: int, rng) -> float:
    """Monte-Carlo estimate of P(C_alpha(X, w) >= C_alpha(X)) with w uniform on the simplex."""
    from .dist import cvar_batch  # local: dist imports nothing from here

    x = np.sort(np.asarray(x, dtype=np.float64))
    gen = as_generator(rng)
    e = gen.standard_exponential((n_draws, x.size))
    w = e / e.sum(axis=1, keepdims=True)
    ref = _backend.kernels.cvar_uniform(x, check_alpha(alpha))
    return float(np.mean(cvar_batch(x, w, alpha) >= ref))
