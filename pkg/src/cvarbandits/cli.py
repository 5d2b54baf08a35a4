"""Command-line entry point.

    cvarbandits run CONFIG.json --out DIR [--threads N] [--seed S]
    cvarbandits cvar --support 0 1 --weights .25 .75 --alpha .5
    cvarbandits kinf --support 0 1 --weights .5 .5 --alpha 1 --target .75
    cvarbandits lb CONFIG.json

Exit codes: 0 ok, 2 config error, 3 trace exhausted, 4 solver failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .dist import DiscreteDist, cvar
from .errors import ConfigError, SolverError, TraceExhaustedError


def _dist(args) -> DiscreteDist:
    try:
        return DiscreteDist(args.support, args.weights)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_run(args) -> int:
    from .harness import ExperimentConfig, run_experiment, write_csv

    cfg = ExperimentConfig.from_json(args.config)
    overrides = {k: getattr(args, k) for k in ("seed", "threads", "horizon", "n_reps", "alpha", "backend")
                 if getattr(args, k) is not None}
    if overrides:
        d = cfg.to_dict()
        d.update(overrides)
        cfg = ExperimentConfig.from_dict(d)
    report = run_experiment(cfg)
    write_csv(report, args.out)
    for n in report.policies:
        if report.checkpoints.size:
            print(f"{n}: regret({report.checkpoints[-1]}) = {report.mean[n][-1]:.3f} "
                  f"(std {report.std[n][-1]:.3f}, {report.n_reps[n]} runs)")
    return 0


def cmd_cvar(args) -> int:
    d = _dist(args)
    try:
        print(repr(cvar(d, args.alpha)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return 0


def cmd_kinf(args) -> int:
    from .kinf import kinf_dual

    d = _dist(args)
    try:
        res = kinf_dual(d, args.target, args.alpha)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(f"value {'inf' if res.infinite else repr(res.value)}")
    if res.value > 0 and not res.infinite:
        print(f"y_star {res.y_star!r}")
        print(f"lambda_star {float(res.lambda_star)!r}")
        print("q_star " + " ".join(repr(float(q)) for q in res.q_star.weights))
    return 0


def cmd_lb(args) -> int:
    from .harness import ExperimentConfig, lower_bound_for_config

    cfg = ExperimentConfig.from_json(args.config)
    curve, values = lower_bound_for_config(cfg)
    print("T,lower_bound")
    for T, v in zip(cfg.checkpoints, values):
        print(f"{T},{float(v)!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cvarbandits", description="CVaR bandit experiments and tools")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config and write CSV results")
    r.add_argument("config")
    r.add_argument("--out", required=True)
    r.add_argument("--threads", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--horizon", type=int)
    r.add_argument("--reps", dest="n_reps", type=int)
    r.add_argument("--alpha", type=float)
    r.add_argument("--backend", choices=["auto", "python", "cython"])
    r.set_defaults(func=cmd_run)

    for name, func, helptext in (("cvar", cmd_cvar, "CVaR of a discrete distribution"),
                                 ("kinf", cmd_kinf, "KL projection onto {CVaR >= target}")):
        c = sub.add_parser(name, help=helptext)
        c.add_argument("--support", type=float, nargs="+", required=True)
        c.add_argument("--weights", type=float, nargs="+", required=True)
        c.add_argument("--alpha", type=float, required=True)
        if name == "kinf":
            c.add_argument("--target", type=float, required=True)
        c.set_defaults(func=func)

    lb = sub.add_parser("lb", help="asymptotic lower-bound curve for a fixed-arm config")
    lb.add_argument("config")
    lb.set_defaults(func=cmd_lb)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, TraceExhaustedError, SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
