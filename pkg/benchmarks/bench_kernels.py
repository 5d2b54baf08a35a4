"""Compare the compiled kernels with the pure-Python reference.

    python benchmarks/bench_kernels.py [--repeat 5] [--horizon 2000]
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from cvarbandits import _backend, _pycore
from cvarbandits import harness as H


def kernel_cases(k, n):
    g = np.random.default_rng(0)
    x = np.ascontiguousarray(np.sort(g.random(n)))
    p = np.full(n, 1.0 / n)
    beta = np.ascontiguousarray(g.integers(1, 100, 11).astype(float))
    sup = np.linspace(0, 1, 11)
    return {
        f"cvar_sorted n={n}": lambda: k.cvar_sorted(x, p, 0.1),
        f"cvar_optimistic n={n}": lambda: k.cvar_optimistic(x, 0.05, 1.0, 0.1),
        f"bcvts_index n={n}": lambda: k.bcvts_index(g, x, 0.1),
        "mcvts_index m=11": lambda: k.mcvts_index(g, sup, beta, 0.1),
    }


def replication_case(backend, ptype, T):
    cfg = H.ExperimentConfig.from_dict(dict(
        environment={"type": "random_multinomial", "K": 5}, policies=[{"type": ptype}],
        alpha=0.1, horizon=T, checkpoints=[T], seed=1))
    env = H.build_instance(cfg, 0)
    return lambda: H.run_replication(cfg, env, cfg.policies[0], 0, backend=backend)


def best(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--horizon", type=int, default=2000)
    args = ap.parse_args(argv)
    if _backend.compiled is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e .` first")
    core = _backend.compiled

    print(f"{'case':34s} {'python':>12s} {'compiled':>12s} {'speedup':>8s}")
    for n in (100, 1000):
        py, cy = kernel_cases(_pycore, n), kernel_cases(core, n)
        for name in py:
            a, b = best(py[name], args.repeat, 200), best(cy[name], args.repeat, 200)
            print(f"{name:34s} {a * 1e6:10.1f}us {b * 1e6:10.1f}us {a / b:7.1f}x")
    for ptype in ("mcvts", "bcvts", "uucb", "cvarucb"):
        name = f"replication {ptype} T={args.horizon}"
        a = best(replication_case("python", ptype, args.horizon), args.repeat, 1)
        b = best(replication_case("cython", ptype, args.horizon), args.repeat, 1)
        print(f"{name:34s} {a * 1e3:10.1f}ms {b * 1e3:10.1f}ms {a / b:7.1f}x")


if __name__ == "__main__":
    main()
