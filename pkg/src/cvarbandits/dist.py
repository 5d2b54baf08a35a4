"""Finite discrete distributions and their CVaR.

CVaR here is the *reward* version: the mean of the worst ``alpha``-fraction
of outcomes, so larger is better and ``alpha = 1`` gives the mean.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend

NORMALIZATION_TOL = 1e-9


def check_alpha(alpha: float) -> float:
    """Validate a CVaR level; returns it as a float."""
    alpha = float(alpha)
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"CVaR level must lie in (0, 1], got {alpha}")
    return alpha


@dataclass(frozen=True, eq=False)
class DiscreteDist:
    """Probability weights on a strictly ascending finite support.

    Duplicate support points are merged by summing their weights.  Weights
    summing to 1 within ``NORMALIZATION_TOL`` are renormalized, anything
    further off is rejected.  Zero-weight points are kept: they are part of
    the declared support.
    """

    support: np.ndarray
    weights: np.ndarray
    bound: float | None = None

    def __post_init__(self):
        x = np.asarray(self.support, dtype=np.float64).ravel()
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        if x.shape != w.shape:
            raise ValueError("support and weights must have the same length")
        if x.size == 0:
            raise ValueError("empty support")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
            raise ValueError("support and weights must be finite")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        total = w.sum()
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"weights sum to {total}, not 1")
        order = np.argsort(x, kind="stable")
        x, w = x[order], w[order]
        if x.size > 1 and np.any(x[1:] == x[:-1]):
            x, inverse = np.unique(x, return_inverse=True)
            w = np.bincount(inverse, weights=w, minlength=x.size)
        w = w / w.sum()
        if self.bound is not None and (x[0] < 0 or x[-1] > self.bound):
            raise ValueError(f"support must lie in [0, {self.bound}]")
        x.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "support", x)
        object.__setattr__(self, "weights", w)

    @classmethod
    def dirac(cls, x: float) -> DiscreteDist:
        return cls([x], [1.0])

    @classmethod
    def empirical(cls, samples) -> DiscreteDist:
        s = np.asarray(samples, dtype=np.float64)
        return cls(s, np.full(s.size, 1.0 / s.size))

    def __len__(self):
        return self.support.size

    def __repr__(self):
        return f"DiscreteDist(support={self.support.tolist()}, weights={self.weights.tolist()})"

    @property
    def mean(self) -> float:
        return float(self.support @ self.weights)

    def cdf(self, x):
        """Right-continuous CDF evaluated at ``x`` (scalar or array)."""
        cum = np.cumsum(self.weights)
        idx = np.searchsorted(self.support, x, side="right")
        out = np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)
        return float(out) if np.ndim(out) == 0 else out

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.weights)

    def scaled(self, factor: float) -> DiscreteDist:
        return DiscreteDist(self.support * factor, self.weights)


def cvar(dist: DiscreteDist, alpha: float) -> float:
    """CVaR at level ``alpha`` via the quantile index (first cumulative mass >= alpha)."""
    alpha = check_alpha(alpha)
    return _backend.kernels.cvar_sorted(dist.support, dist.weights, alpha)


def cvar_sup_oracle(dist: DiscreteDist, alpha: float) -> float:
    """CVaR as max over support points of ``x - E[(x - X)^+] / alpha``.

    Brute-force reference for :func:`cvar`.
    """
    alpha = check_alpha(alpha)
    x, w = dist.support, dist.weights
    shortfall = np.maximum(x[:, None] - x[None, :], 0.0) @ w
    return float(np.max(x - shortfall / alpha))


def cvar_batch(support, weights, alpha: float) -> np.ndarray:
    """Vectorised CVaR for many weight vectors on one ascending support.

    ``weights`` has shape (n, M).  Uses the max-over-support form, so it is
    exact up to rounding and independent of :func:`cvar`.
    """
    alpha = check_alpha(alpha)
    x = np.asarray(support, dtype=np.float64)
    w = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    gaps = np.maximum(x[:, None] - x[None, :], 0.0)  # gaps[j, i] = (x_j - x_i)^+
    return np.max(x[None, :] - (w @ gaps.T) / alpha, axis=1)


def empirical_cvar(samples, alpha: float) -> float:
    """CVaR of the empirical distribution of ``samples``."""
    alpha = check_alpha(alpha)
    return _backend.kernels.cvar_uniform(np.sort(np.asarray(samples, dtype=np.float64)), alpha)


def empirical_cvar_batch(samples, alpha: float) -> np.ndarray:
    """Row-wise empirical CVaR of an (n_rows, n) sample matrix."""
    alpha = check_alpha(alpha)
    s = np.sort(np.atleast_2d(np.asarray(samples, dtype=np.float64)), axis=1)
    n = s.shape[1]
    # smallest 1-based index i with i / n >= alpha
    i = max(1, int(np.ceil(alpha * n)))
    while i > 1 and (i - 1) / n >= alpha:
        i -= 1
    while i / n < alpha and i < n:
        i += 1
    head = s[:, : i - 1].sum(axis=1) / n
    return (head + (alpha - (i - 1) / n) * s[:, i - 1]) / alpha


def align(d1: DiscreteDist, d2: DiscreteDist) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Express both weight vectors on the union of the two supports."""
    x = np.union1d(d1.support, d2.support)
    w1 = np.zeros(x.size)
    w2 = np.zeros(x.size)
    w1[np.searchsorted(x, d1.support)] = d1.weights
    w2[np.searchsorted(x, d2.support)] = d2.weights
    return x, w1, w2


def sup_distance(d1: DiscreteDist, d2: DiscreteDist) -> float:
    """L-infinity distance between the weight vectors of two laws on a common support."""
    if d1.support.shape != d2.support.shape or np.any(d1.support != d2.support):
        raise ValueError("supports differ; align them first")
    return float(np.max(np.abs(d1.weights - d2.weights)))


def cdf_sup_distance(d1: DiscreteDist, d2: DiscreteDist) -> float:
    """Kolmogorov distance sup_x |F1(x) - F2(x)|."""
    _, w1, w2 = align(d1, d2)
    return float(np.max(np.abs(np.cumsum(w1) - np.cumsum(w2))))


def levy_distance(d1: DiscreteDist, d2: DiscreteDist, bound: float | None = None,
                  tol: float = 1e-9) -> float:
    """Levy distance between the step CDFs of ``d1`` (F) and ``d2`` (G) on [0, bound].

    Bisection over eps in [0, 1] on the band condition
    ``F(x - eps) - eps <= G(x) <= F(x + eps) + eps``.  Both sides are
    right-continuous step functions of x, so checking the condition at the
    left end of every constant piece is exact.
    """
    if bound is None:
        bound = float(max(d1.support[-1], d2.support[-1]))
    xf = d1.support
    xg = d2.support

    def holds(eps: float) -> bool:
        # lower side: F(x - eps) - eps - G(x) <= 0
        pts = np.concatenate(([0.0], xg, xf + eps))
        pts = pts[(pts >= 0) & (pts <= bound)]
        if np.any(d1.cdf(pts - eps) - eps > d2.cdf(pts)):
            return False
        # upper side: G(x) - F(x + eps) - eps <= 0
        pts = np.concatenate(([0.0], xg, xf - eps))
        pts = pts[(pts >= 0) & (pts <= bound)]
        return not np.any(d2.cdf(pts) > d1.cdf(pts + eps) + eps)

    if holds(0.0):
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if holds(mid):
            hi = mid
        else:
            lo = mid
    return hi


def kl_divergence(p, q) -> float:
    """KL(p || q) in nats for weight vectors on a common support."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    mask = p > 0
    if np.any(q[mask] <= 0):
        return float("inf")
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))
