"""KL projection onto the set of laws with CVaR above a target, and the regret lower bound.

For a law ``p`` on a known finite support X,

    Kinf(p, c) = inf { KL(p, q) : q on X, CVaR_alpha(q) >= c }.

``CVaR_alpha(q) >= c`` holds iff some ``y`` has ``E_q[h_y(X)] >= 0`` with
``h_y(x) = (y - c) alpha - (y - x)^+``, so Kinf is the minimum over ``y`` of a
moment-constrained projection.  Each of those has the one-dimensional dual

    max_{0 <= lam <= 1 / ((y - c) alpha)}  E_p[log(1 - lam h_y(X))],

a concave problem solved here by bisection on its derivative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dist import DiscreteDist, check_alpha, cvar, cvar_batch, kl_divergence
from .errors import SolverError

LAMBDA_MARGIN = 1e-12
BISECT_TOL = 1e-10
MAX_BISECT = 200


@dataclass(frozen=True, eq=False)
class KinfResult:
    value: float
    y_star: float | None
    lambda_star: float
    q_star: DiscreteDist
    infinite: bool = False

    def __float__(self):
        return math.inf if self.infinite else self.value


def _maximize_dual(p: np.ndarray, a: np.ndarray, lam_max: float) -> tuple[float, float, bool]:
    """Maximise sum p log(1 - lam a) on [0, lam_max].  Returns (lam, value, at_boundary)."""
    mask = p > 0
    pm, am = p[mask], a[mask]

    def deriv(lam):
        return -np.sum(pm * am / (1.0 - lam * am))

    def value(lam):
        return float(np.sum(pm * np.log1p(-lam * am)))

    if deriv(0.0) <= 0.0:
        return 0.0, 0.0, False
    hi = lam_max * (1.0 - LAMBDA_MARGIN)
    if deriv(hi) >= 0.0:
        return hi, value(hi), True
    lo = 0.0
    for _ in range(MAX_BISECT):
        mid = 0.5 * (lo + hi)
        d = deriv(mid)
        if not math.isfinite(d):
            raise SolverError(f"non-finite dual derivative at lambda={mid}")
        if d > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= BISECT_TOL * max(1.0, hi):
            break
    else:
        raise SolverError("dual bisection did not converge")
    lam = 0.5 * (lo + hi)
    return lam, value(lam), False


def _recover_q(p: np.ndarray, a: np.ndarray, lam: float, boundary: bool) -> np.ndarray:
    q = p / (1.0 - lam * a)
    if boundary:
        # leftover mass goes to the top of the support, which p does not charge
        q[-1] += max(0.0, 1.0 - q.sum())
    s = q.sum()
    if not math.isfinite(s) or s <= 0:
        raise SolverError("could not recover the projected distribution")
    return q / s


def kinf_dual(p: DiscreteDist, c: float, alpha: float) -> KinfResult:
    """Kinf of ``p`` against target ``c`` at level ``alpha`` via the one-dimensional dual."""
    alpha = check_alpha(alpha)
    if not math.isfinite(c):
        raise ValueError(f"target must be finite, got {c}")
    x, w = p.support, np.asarray(p.weights)
    if cvar(p, alpha) >= c:
        return KinfResult(0.0, None, 0.0, p)
    if c >= x[-1]:
        return KinfResult(math.inf, float(x[-1]), math.inf, DiscreteDist.dirac(x[-1]), infinite=True)

    best = None
    for y in x[x > c]:
        a = (y - c) * alpha - np.maximum(y - x, 0.0)
        lam, val, boundary = _maximize_dual(w, a, 1.0 / (alpha * (y - c)))
        if not math.isfinite(val):
            raise SolverError(f"non-finite dual value at y={y}")
        if best is None or val < best[0]:
            best = (val, float(y), lam, a, boundary)
    val, y, lam, a, boundary = best
    q = _recover_q(w, a, lam, boundary)
    return KinfResult(max(float(val), 0.0), y, float(lam), DiscreteDist(x, q))


def kinf_grid_oracle(p: DiscreteDist, c: float, alpha: float, step: float = 1e-3) -> float:
    """Brute-force Kinf over the simplex grid of mesh ``step`` (support size at most 4)."""
    alpha = check_alpha(alpha)
    m = len(p)
    if m > 4:
        raise ValueError("grid oracle is limited to supports of size <= 4")
    n = int(round(1.0 / step))
    grid = _simplex_grid(m, n)
    ok = cvar_batch(p.support, grid, alpha) >= c
    if not ok.any():
        return math.inf
    q = grid[ok]
    w = np.asarray(p.weights)
    mask = w > 0
    with np.errstate(divide="ignore"):
        kl = np.sum(w[mask] * (np.log(w[mask]) - np.log(q[:, mask])), axis=1)
    return float(kl.min())


_GRID_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _simplex_grid(m: int, n: int) -> np.ndarray:
    key = (m, n)
    if key not in _GRID_CACHE:
        if m == 1:
            g = np.ones((1, 1))
        else:
            axes = np.meshgrid(*([np.arange(n + 1)] * (m - 1)), indexing="ij")
            head = np.stack([ax.ravel() for ax in axes], axis=1)
            head = head[head.sum(axis=1) <= n]
            g = np.column_stack([head, n - head.sum(axis=1)]) / n
        g.setflags(write=False)
        _GRID_CACHE[key] = g
    return _GRID_CACHE[key]


def pinsker_floor(gap: float, alpha: float) -> float:
    """Lower bound ``(alpha * gap)^2 / 2`` on Kinf for supports in [0, 1]."""
    return (alpha * gap) ** 2 / 2.0


@dataclass(frozen=True, eq=False)
class LowerBoundCurve:
    """Asymptotic regret lower bound ``sum_k gap_k log T / Kinf_k``."""

    alpha: float
    c_star: float
    gaps: np.ndarray
    kinf: np.ndarray
    infinite: np.ndarray = field(repr=False)

    @property
    def slope(self) -> float:
        """Coefficient of log T."""
        use = (self.gaps > 0) & ~self.infinite
        return float(np.sum(self.gaps[use] / self.kinf[use]))

    def __call__(self, T):
        return self.slope * np.log(np.asarray(T, dtype=np.float64))


def lower_bound_curve(arms, alpha: float, T_grid=None):
    """Lower-bound curve for multinomial ``arms``; evaluated on ``T_grid`` when given."""
    alpha = check_alpha(alpha)
    arms = list(arms)
    if len(arms) < 2:
        raise ValueError("need at least two arms")
    cv = np.array([cvar(a, alpha) for a in arms])
    c_star = float(cv.max())
    gaps = c_star - cv
    kv = np.zeros(len(arms))
    inf = np.zeros(len(arms), dtype=bool)
    for k, a in enumerate(arms):
        if gaps[k] > 0:
            res = kinf_dual(a, c_star, alpha)
            kv[k] = res.value
            inf[k] = res.infinite
    curve = LowerBoundCurve(alpha, c_star, gaps, kv, inf)
    return curve if T_grid is None else (curve, curve(T_grid))


def kl_check(p: DiscreteDist, res: KinfResult) -> float:
    """KL(p, q_star) recomputed from the recovered minimiser."""
    return kl_divergence(p.weights, res.q_star.weights)
