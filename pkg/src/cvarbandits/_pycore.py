"""Pure-Python kernels.

Reference implementation of every routine in ``_core.pyx``.  Both modules
consume random numbers in the same order and perform the same floating-point
operations in the same order, so for a given generator state they return
bit-identical results.  Keep them in lockstep when editing either one.
"""
from __future__ import annotations

import math

import numpy as np

NAME = "python"


def cvar_sorted(x, p, alpha, scale=1.0):
    """CVaR of the discrete law putting mass ``p[i] / scale`` on ``x[i]``.

    ``x`` must be ascending.  The cumulative mass is Kahan-compensated and
    compared to ``alpha`` without slack; the last atom absorbs any rounding
    shortfall.
    """
    xs = x.tolist() if isinstance(x, np.ndarray) else list(x)
    ps = p.tolist() if isinstance(p, np.ndarray) else list(p)
    n = len(xs)
    cum = 0.0
    comp = 0.0
    acc = 0.0
    for i in range(n):
        m = ps[i] / scale
        y = m - comp
        t = cum + y
        if t >= alpha or i == n - 1:
            return acc / alpha + ((alpha - cum) / alpha) * xs[i]
        comp = (t - cum) - y
        cum = t
        acc += m * xs[i]
    raise ValueError("empty support")


def cvar_uniform(x, alpha):
    """CVaR of the empirical law of the ascending sample ``x``."""
    xs = x.tolist() if isinstance(x, np.ndarray) else list(x)
    n = len(xs)
    if n == 0:
        raise ValueError("empty sample")
    m = 1.0 / n
    cum = 0.0
    comp = 0.0
    acc = 0.0
    for i in range(n):
        y = m - comp
        t = cum + y
        if t >= alpha or i == n - 1:
            return acc / alpha + ((alpha - cum) / alpha) * xs[i]
        comp = (t - cum) - y
        cum = t
        acc += m * xs[i]
    raise AssertionError("unreachable")


def cvar_optimistic(x, eps, upper, alpha):
    """CVaR after moving mass ``eps`` from the bottom of the sample to ``upper``."""
    if eps >= 1.0:
        return upper
    xs = x.tolist() if isinstance(x, np.ndarray) else list(x)
    n = len(xs)
    if n == 0:
        raise ValueError("empty sample")
    w = 1.0 / n
    r = eps
    cum = 0.0
    comp = 0.0
    acc = 0.0
    for i in range(n):
        m = w
        if r > 0.0:
            if r >= m:
                r -= m
                continue
            m = m - r
            r = 0.0
        y = m - comp
        t = cum + y
        if t >= alpha:
            return acc / alpha + ((alpha - cum) / alpha) * xs[i]
        comp = (t - cum) - y
        cum = t
        acc += m * xs[i]
    return acc / alpha + ((alpha - cum) / alpha) * upper


def dirichlet(gen, beta):
    g = gen.standard_gamma(np.asarray(beta, dtype=np.float64)).tolist()
    s = 0.0
    for v in g:
        s += v
    return np.array([v / s for v in g])


def uniform_simplex(gen, n):
    e = gen.standard_exponential(n).tolist()
    s = 0.0
    for v in e:
        s += v
    return np.array([v / s for v in e])


def mcvts_index(gen, support, beta, alpha):
    g = gen.standard_gamma(np.asarray(beta, dtype=np.float64)).tolist()
    s = 0.0
    for v in g:
        s += v
    return cvar_sorted(support, g, alpha, s)


def bcvts_index(gen, x, alpha):
    e = gen.standard_exponential(len(x)).tolist()
    s = 0.0
    for v in e:
        s += v
    return cvar_sorted(x, e, alpha, s)


def argmax_tiebreak(gen, values):
    vals = values.tolist() if isinstance(values, np.ndarray) else list(values)
    best = vals[0]
    nties = 1
    for v in vals[1:]:
        if v > best:
            best = v
            nties = 1
        elif v == best:
            nties += 1
    if nties == 1:
        return vals.index(best)
    pick = int(gen.random() * nties)
    for k, v in enumerate(vals):
        if v == best:
            if pick == 0:
                return k
            pick -= 1
    raise AssertionError("unreachable")


def search_cum(cum, u):
    """First index with ``u < cum[i]``; past-the-end maps to the last atom with mass."""
    n = len(cum)
    lo, hi = 0, n
    while lo < hi:
        mid = (lo + hi) // 2
        if u < cum[mid]:
            hi = mid
        else:
            lo = mid + 1
    if lo == n:
        lo = n - 1
        while lo > 0 and cum[lo] == cum[lo - 1]:
            lo -= 1
    return lo


def sample_discrete_index(gen, cum):
    return search_cum(cum, gen.random())


def sample_tgm(gen, means, sds, cum, bound):
    j = search_cum(cum, gen.random())
    z = gen.standard_normal()
    v = means[j] + sds[j] * z
    return min(max(v, 0.0), bound)


def dkw_radius(t, n):
    return min(1.0, math.sqrt(math.log(2.0 * t * t) / (2.0 * n)))


def uucb_bonus(t, n, alpha, upper, c):
    return upper / alpha * math.sqrt(c * math.log(t) / (2.0 * n))
