"""Arm models, bandit environments and true-CVaR oracles."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from scipy.special import ndtr

from . import _backend
from .dist import DiscreteDist, check_alpha, cvar, empirical_cvar
from .errors import ConfigError, TraceExhaustedError
from .rng import TgmParams, as_generator, uniform_simplex

log = logging.getLogger(__name__)

# arm kind codes shared with the compiled kernel
MULTINOMIAL, TGM, TRACE = 0, 1, 2

QUAD_NODES = 2048
QUANTILE_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class MultinomialArm:
    dist: DiscreteDist
    bound: float = 1.0
    kind: int = field(default=MULTINOMIAL, init=False)

    def __post_init__(self):
        if self.dist.support[0] < 0 or self.dist.support[-1] > self.bound:
            raise ValueError(f"support must lie in [0, {self.bound}]")

    def true_cvar(self, alpha: float) -> float:
        return cvar(self.dist, alpha)

    def mean(self) -> float:
        return self.dist.mean


@dataclass(frozen=True, eq=False)
class TgmArm:
    params: TgmParams
    kind: int = field(default=TGM, init=False)

    @property
    def bound(self) -> float:
        return self.params.bound

    def true_cvar(self, alpha: float, nodes: int = QUAD_NODES, tol: float = QUANTILE_TOL) -> float:
        return tgm_cvar(self.params, alpha, nodes, tol)

    def mean(self) -> float:
        return tgm_cvar(self.params, 1.0)


@dataclass(frozen=True, eq=False)
class TraceArm:
    """Replays ``samples`` in order; ``replace=True`` resamples uniformly instead."""

    samples: np.ndarray
    bound: float = 1.0
    replace: bool = False
    name: str = ""
    kind: int = field(default=TRACE, init=False)

    def __post_init__(self):
        s = np.ascontiguousarray(self.samples, dtype=np.float64).ravel()
        if s.size == 0:
            raise ValueError("empty trace")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    def true_cvar(self, alpha: float) -> float:
        return empirical_cvar(self.samples, alpha)

    def mean(self) -> float:
        return float(self.samples.mean())


ArmModel = Union[MultinomialArm, TgmArm, TraceArm]


# ---------------------------------------------------------------------------
# clipped Gaussian mixture CDF and CVaR

def tgm_cdf(params: TgmParams, v):
    """CDF of the clipped mixture: jumps at 0 and ``bound``, Gaussian in between."""
    v = np.asarray(v, dtype=np.float64)
    m, s, w = params.means, params.sds, params.mode_weights
    vv = v[..., None]
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(s > 0, (vv - m) / np.where(s > 0, s, 1.0), 0.0)
    comp = np.where(s > 0, ndtr(z), (vv >= m).astype(np.float64))
    out = comp @ w
    out = np.where(v < 0, 0.0, out)
    return np.where(v >= params.bound, 1.0, out)


def _quantiles(params: TgmParams, u: np.ndarray, tol: float) -> np.ndarray:
    lo = np.zeros_like(u)
    hi = np.full_like(u, params.bound)
    while np.max(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        above = tgm_cdf(params, mid) >= u
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    return hi


def tgm_cvar(params: TgmParams, alpha: float, nodes: int = QUAD_NODES,
             tol: float = QUANTILE_TOL) -> float:
    """(1/alpha) * integral_0^alpha F^{-1}(u) du for the clipped mixture.

    The atoms at 0 and ``bound`` are integrated exactly; the interior part of
    the quantile function uses a midpoint rule on ``nodes`` points with
    quantiles found by bisection.  All-degenerate mixtures are exact.
    """
    alpha = check_alpha(alpha)
    if np.all(params.sds == 0):
        x = np.clip(params.means, 0.0, params.bound)
        return cvar(DiscreteDist(x, params.mode_weights), alpha)
    b = params.bound
    f0 = float(tgm_cdf(params, 0.0))
    # mass strictly below the bound
    m, s, w = params.means, params.sds, params.mode_weights
    with np.errstate(divide="ignore", invalid="ignore"):
        fb = float(np.where(s > 0, ndtr((b - m) / np.where(s > 0, s, 1.0)), (m < b).astype(float)) @ w)
    lo_u, hi_u = min(f0, alpha), min(fb, alpha)
    total = 0.0
    if hi_u > lo_u:
        h = (hi_u - lo_u) / nodes
        u = lo_u + h * (np.arange(nodes) + 0.5)
        total += h * float(np.sum(_quantiles(params, u, tol)))
    total += b * max(0.0, alpha - max(fb, lo_u))
    return total / alpha


def tgm_cvar_closed_form(params: TgmParams, alpha: float) -> float:
    """Reference via Gaussian partial expectations and a root-found VaR (all sds > 0)."""
    from scipy.optimize import brentq
    from scipy.stats import norm

    alpha = check_alpha(alpha)
    m, s, w, b = params.means, params.sds, params.mode_weights, params.bound
    f0 = float(tgm_cdf(params, 0.0))
    if f0 >= alpha:
        return 0.0
    fb = float(w @ norm.cdf((b - m) / s))
    q = b if fb < alpha else brentq(lambda v: float(w @ norm.cdf((v - m) / s)) - alpha, 0.0, b,
                                    xtol=1e-14, rtol=1e-14)
    lo, hi = (0.0 - m) / s, (min(q, b) - m) / s
    partial = float(w @ (m * (norm.cdf(hi) - norm.cdf(lo)) - s * (norm.pdf(hi) - norm.pdf(lo))))
    below = float(tgm_cdf(params, q)) if q < b else fb
    return (partial + q * (alpha - below)) / alpha


def true_cvar(arm: ArmModel, alpha: float) -> float:
    return arm.true_cvar(alpha)


# ---------------------------------------------------------------------------
# environment

@dataclass(frozen=True, eq=False)
class BanditEnv:
    """Arms plus their CVaRs at ``alpha``.  Trace cursors are per replica."""

    arms: tuple
    alpha: float
    true_cvars: np.ndarray = field(init=False)
    c_star: float = field(init=False)
    gaps: np.ndarray = field(init=False)
    _cursors: list = field(init=False, repr=False)

    def __post_init__(self):
        arms = tuple(self.arms)
        if len(arms) < 1:
            raise ValueError("environment needs at least one arm")
        alpha = check_alpha(self.alpha)
        cv = np.array([a.true_cvar(alpha) for a in arms])
        c_star = float(cv.max())
        gaps = c_star - cv
        cv.setflags(write=False)
        gaps.setflags(write=False)
        for name, val in (("arms", arms), ("alpha", alpha), ("true_cvars", cv),
                          ("c_star", c_star), ("gaps", gaps), ("_cursors", [0] * len(arms))):
            object.__setattr__(self, name, val)

    @property
    def n_arms(self) -> int:
        return len(self.arms)

    @property
    def bounds(self) -> np.ndarray:
        return np.array([a.bound for a in self.arms], dtype=np.float64)

    def replica(self) -> BanditEnv:
        """Copy sharing arms and oracles but with fresh trace cursors."""
        new = object.__new__(BanditEnv)
        new.__dict__.update(self.__dict__)
        object.__setattr__(new, "_cursors", [0] * len(self.arms))
        return new

    def with_alpha(self, alpha: float) -> BanditEnv:
        return BanditEnv(self.arms, alpha)


def pull(env: BanditEnv, arm: int, rng) -> float:
    """One reward from ``arm``; draws the same random numbers as the compiled kernel."""
    k = _backend.kernels
    a = env.arms[arm]
    gen = as_generator(rng)
    if a.kind == MULTINOMIAL:
        return float(a.dist.support[k.sample_discrete_index(gen, _cum(a))])
    if a.kind == TGM:
        p = a.params
        return float(k.sample_tgm(gen, p.means, p.sds, p.cum_weights, p.bound))
    if a.replace:
        return float(a.samples[int(gen.random() * a.samples.size)])
    cur = env._cursors[arm]
    if cur >= a.samples.size:
        raise TraceExhaustedError(f"trace for arm {arm} exhausted after {cur} pulls")
    env._cursors[arm] = cur + 1
    return float(a.samples[cur])


def _cum(arm: MultinomialArm) -> np.ndarray:
    return np.ascontiguousarray(arm.dist.cumulative())


# ---------------------------------------------------------------------------
# random instances

def make_random_multinomial_instance(rng, K: int, support: Sequence[float], alpha: float,
                                     bound: float = 1.0) -> BanditEnv:
    """K arms on a common ``support`` with weights uniform on the simplex."""
    if K < 2:
        raise ValueError("need K >= 2")
    x = np.asarray(support, dtype=np.float64)
    arms = [MultinomialArm(DiscreteDist(x, uniform_simplex(rng, x.size)), bound) for _ in range(K)]
    return BanditEnv(tuple(arms), alpha)


def make_random_tgm_instance(rng, K: int = 30, n_modes: int = 10,
                             mean_range: tuple[float, float] = (0.25, 1.0),
                             sd_range: tuple[float, float] = (0.0, 0.1),
                             alpha: float = 0.1, bound: float = 1.0) -> BanditEnv:
    """K clipped Gaussian mixtures with uniformly drawn means, sds and mode weights."""
    if K < 2 or n_modes < 1:
        raise ValueError("need K >= 2 and n_modes >= 1")
    gen = as_generator(rng)
    arms = []
    for _ in range(K):
        means = gen.uniform(mean_range[0], mean_range[1], n_modes)
        sds = gen.uniform(sd_range[0], sd_range[1], n_modes)
        w = uniform_simplex(gen, n_modes)
        arms.append(TgmArm(TgmParams(means, sds, w, bound)))
    return BanditEnv(tuple(arms), alpha)


# ---------------------------------------------------------------------------
# traces

@dataclass
class TraceTable:
    names: list[str]
    columns: list[np.ndarray]
    n_clamped: int = 0


def load_trace_csv(path, bounds: float | Sequence[float] = 1.0) -> TraceTable:
    """Read a trace CSV (header of arm names, one column per arm).

    Empty cells end a column early, so arms may have traces of different
    lengths.  Values outside [0, B_k] are clamped and counted.
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read trace file {path}: {exc}") from exc
    if not rows:
        raise ConfigError(f"trace file {path} is empty")
    names = [n.strip() for n in rows[0]]
    k = len(names)
    b = np.broadcast_to(np.asarray(bounds, dtype=np.float64), (k,))
    cols: list[list[float]] = [[] for _ in range(k)]
    for lineno, row in enumerate(rows[1:], start=2):
        for j in range(k):
            cell = row[j].strip() if j < len(row) else ""
            if cell == "":
                continue
            try:
                cols[j].append(float(cell))
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: non-numeric value {cell!r}") from exc
    out, clamped = [], 0
    for j in range(k):
        c = np.asarray(cols[j])
        if c.size == 0:
            raise ConfigError(f"trace column {names[j]!r} is empty")
        bad = (c < 0) | (c > b[j])
        clamped += int(bad.sum())
        out.append(np.clip(c, 0.0, b[j]))
    if clamped:
        log.warning("clamped %d trace values into their arm bounds", clamped)
    return TraceTable(names, out, clamped)


def trace_env(table: TraceTable, alpha: float, bounds: float | Sequence[float] = 1.0,
              replace: bool = False) -> BanditEnv:
    b = np.broadcast_to(np.asarray(bounds, dtype=np.float64), (len(table.columns),))
    arms = [TraceArm(c, float(bk), replace, n) for c, bk, n in zip(table.columns, b, table.names)]
    return BanditEnv(tuple(arms), alpha)


# ---------------------------------------------------------------------------
# kernel encoding

def kernel_arrays(env: BanditEnv) -> dict:
    """Flatten the arms into the arrays the compiled ``simulate`` expects."""
    kinds, bounds, offs, lens, vals, cums, sds, reps = [], [], [], [], [], [], [], []
    off = 0
    for a in env.arms:
        if a.kind == MULTINOMIAL:
            v, c, s, r = a.dist.support, _cum(a), np.zeros(len(a.dist)), 0
        elif a.kind == TGM:
            p = a.params
            v, c, s, r = p.means, p.cum_weights, p.sds, 0
        else:
            v, c, s, r = a.samples, np.zeros(a.samples.size), np.zeros(a.samples.size), int(a.replace)
        kinds.append(a.kind)
        bounds.append(a.bound)
        offs.append(off)
        lens.append(v.size)
        vals.append(v)
        cums.append(c)
        sds.append(s)
        reps.append(r)
        off += v.size
    return dict(
        arm_kind=np.array(kinds, dtype=np.int32),
        arm_bound=np.array(bounds, dtype=np.float64),
        arm_off=np.array(offs, dtype=np.intp),
        arm_len=np.array(lens, dtype=np.intp),
        arm_vals=np.ascontiguousarray(np.concatenate(vals), dtype=np.float64),
        arm_cum=np.ascontiguousarray(np.concatenate(cums), dtype=np.float64),
        arm_sd=np.ascontiguousarray(np.concatenate(sds), dtype=np.float64),
        arm_replace=np.array(reps, dtype=np.int32),
    )


def supports(env: BanditEnv) -> list[np.ndarray]:
    """Known supports for M-CVTS; only defined for multinomial arms."""
    out = []
    for a in env.arms:
        if a.kind != MULTINOMIAL:
            raise ConfigError("M-CVTS needs multinomial arms with known supports")
        out.append(np.asarray(a.dist.support))
    return out
