"""Experiment orchestration: replications, pseudo-regret, aggregation and CSV output.

Random streams are keyed by labels only:

* instance generation: ``(seed, "instance", i)``
* rewards of arm ``k`` in replication ``r`` of instance ``i``: ``(seed, "reward", i, r, k)``
* policy randomness: ``(seed, "policy", i, r, policy name)``

Rewards are shared across policies (common random numbers), and no stream
depends on which worker thread runs a task or in what order tasks finish.
"""
from __future__ import annotations

import csv
import json
import logging
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, _backend
from . import env as envmod
from . import policies as pol
from .dist import DiscreteDist, check_alpha
from .errors import ConfigError, TraceExhaustedError
from .rng import RngStream, TgmParams

log = logging.getLogger(__name__)

SUPPORT_11 = tuple(round(0.1 * i, 10) for i in range(11))
SUPPORT_10 = SUPPORT_11[1:]
STD_CONVENTION = "pooled: sample std (ddof=1) over all (instance, replication) regret values"

POLICY_TYPES = {
    "mcvts": "M-CVTS",
    "bcvts": "B-CVTS",
    "uucb": "U-UCB",
    "cvarucb": "CVaR-UCB",
    "uniform": "uniform",
}


def default_checkpoints(T: int, n: int = 32, start: int = 10) -> list[int]:
    start = min(start, T)
    pts = np.unique(np.round(np.geomspace(start, T, n)).astype(np.int64))
    return [int(p) for p in pts]


@dataclass
class PolicySpec:
    type: str
    name: str | None = None
    alpha: float | None = None
    C: float = 2.0
    upper: float | None = None

    def __post_init__(self):
        if self.type not in POLICY_TYPES:
            raise ConfigError(f"unknown policy type {self.type!r}; choose from {sorted(POLICY_TYPES)}")
        if self.name is None:
            self.name = POLICY_TYPES[self.type]


@dataclass
class ExperimentConfig:
    environment: dict
    policies: list
    alpha: float
    horizon: int
    n_reps: int = 1
    checkpoints: list | None = None
    seed: int = 0
    threads: int = 1
    backend: str = "auto"

    def __post_init__(self):
        try:
            self.alpha = check_alpha(self.alpha)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        self.policies = [p if isinstance(p, PolicySpec) else PolicySpec(**p) for p in self.policies]
        if not self.policies:
            raise ConfigError("no policies configured")
        names = [p.name for p in self.policies]
        if len(set(names)) != len(names):
            raise ConfigError(f"policy names must be unique: {names}")
        self.horizon = int(self.horizon)
        self.n_reps = int(self.n_reps)
        if self.n_reps < 1:
            raise ConfigError("n_reps must be at least 1")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.backend not in ("auto", "python", "cython"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        k = self.n_arms
        if self.horizon < k:
            raise ConfigError(f"horizon {self.horizon} is shorter than the number of arms {k}")
        if self.checkpoints is None:
            self.checkpoints = default_checkpoints(self.horizon)
        cp = [int(c) for c in self.checkpoints]
        if any(b <= a for a, b in zip(cp, cp[1:])):
            raise ConfigError("checkpoints must be strictly increasing")
        if cp and (cp[0] < 1 or cp[-1] > self.horizon):
            raise ConfigError(f"checkpoints must lie in [1, {self.horizon}]")
        self.checkpoints = cp

    @property
    def n_arms(self) -> int:
        e = self.environment
        kind = e.get("type")
        if kind == "fixed":
            return len(e["arms"])
        if kind in ("random_multinomial", "random_tgm"):
            return int(e.get("K", 5 if kind == "random_multinomial" else 30))
        if kind == "trace":
            return len(_trace_table(e).columns)
        raise ConfigError(f"unknown environment type {kind!r}")

    @property
    def n_instances(self) -> int:
        return int(self.environment.get("n_instances", 1))

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> ExperimentConfig:
        try:
            with open(path) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load config {path}: {exc}") from exc
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["policies"] = [asdict(p) for p in self.policies]
        return d


# ---------------------------------------------------------------------------
# environments

_TRACE_CACHE: dict = {}


def _trace_table(spec: dict):
    key = (spec["path"], json.dumps(spec.get("bounds", 1.0)))
    if key not in _TRACE_CACHE:
        _TRACE_CACHE[key] = envmod.load_trace_csv(spec["path"], spec.get("bounds", 1.0))
    return _TRACE_CACHE[key]


def _arm_from_spec(a: dict):
    kind = a.get("kind", "multinomial")
    bound = float(a.get("bound", 1.0))
    try:
        if kind == "multinomial":
            return envmod.MultinomialArm(DiscreteDist(a["support"], a["weights"]), bound)
        if kind == "tgm":
            return envmod.TgmArm(TgmParams(a["means"], a["sds"], a["weights"], bound))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad arm spec {a}: {exc}") from exc
    raise ConfigError(f"unknown arm kind {kind!r}")


def build_instance(config: ExperimentConfig, i: int) -> envmod.BanditEnv:
    """Environment for instance ``i``; random generators use stream ``("instance", i)``."""
    e = config.environment
    kind = e["type"]
    if kind == "fixed":
        return envmod.BanditEnv(tuple(_arm_from_spec(a) for a in e["arms"]), config.alpha)
    if kind == "trace":
        return envmod.trace_env(_trace_table(e), config.alpha, e.get("bounds", 1.0),
                                bool(e.get("replace", False)))
    rng = RngStream.derive(config.seed, "instance", i)
    if kind == "random_multinomial":
        support = e.get("support")
        if support is None:
            support = SUPPORT_10 if e.get("support_variant") == "10" else SUPPORT_11
        return envmod.make_random_multinomial_instance(rng, int(e.get("K", 5)), support, config.alpha)
    if kind == "random_tgm":
        return envmod.make_random_tgm_instance(
            rng, int(e.get("K", 30)), int(e.get("n_modes", 10)),
            tuple(e.get("mean_range", (0.25, 1.0))), tuple(e.get("sd_range", (0.0, 0.1))),
            config.alpha, float(e.get("bound", 1.0)))
    raise ConfigError(f"unknown environment type {kind!r}")


# ---------------------------------------------------------------------------
# policies

def make_policy(spec: PolicySpec, env: envmod.BanditEnv, alpha: float):
    a = spec.alpha if spec.alpha is not None else alpha
    upper = spec.upper if spec.upper is not None else float(env.bounds.max())
    if spec.type == "mcvts":
        return pol.McvtsPolicy(envmod.supports(env), a, spec.name)
    if spec.type == "bcvts":
        return pol.BcvtsPolicy(env.bounds, a, spec.name)
    if spec.type == "uucb":
        return pol.UUcbPolicy(env.n_arms, a, upper, spec.C, spec.name)
    if spec.type == "cvarucb":
        return pol.CvarUcbPolicy(env.n_arms, a, upper, spec.name)
    return pol.UniformPolicy(env.n_arms, spec.name)


# ---------------------------------------------------------------------------
# one replication

@dataclass
class RegretTrace:
    """Pseudo-regret ``sum_k gap_k N_k(t)`` at each checkpoint, plus final pull counts."""

    checkpoints: np.ndarray
    regret: np.ndarray
    counts: np.ndarray          # (n_checkpoints, K)
    final_counts: np.ndarray    # N_k(T)
    n_clamped: int = 0


def _play_python(env, policy, T, record, policy_rng, arm_rngs):
    env = env.replica()
    K = env.n_arms
    counts = np.zeros(K, dtype=np.int64)
    out = np.zeros((len(record), K), dtype=np.int64)
    ci = 0
    for t in range(1, T + 1):
        a = policy.select(t, policy_rng)
        r = envmod.pull(env, a, arm_rngs[a])
        policy.update(a, r)
        counts[a] += 1
        while ci < len(record) and record[ci] == t:
            out[ci] = counts
            ci += 1
    return out, int(getattr(policy, "n_clamped", 0))


def _play_kernel(env, policy, T, record, policy_rng, arm_rngs):
    k = _backend.get("cython")
    arrays = envmod.kernel_arrays(env)
    if policy.code == pol.MCVTS:
        sups = policy.supports
        sup_vals = np.ascontiguousarray(np.concatenate(sups))
        sup_len = np.array([s.size for s in sups], dtype=np.intp)
        sup_off = np.concatenate(([0], np.cumsum(sup_len)[:-1])).astype(np.intp)
    else:
        sup_vals, sup_off, sup_len = np.empty(0), np.empty(0, np.intp), np.empty(0, np.intp)
    bb = np.ascontiguousarray(getattr(policy, "bounds", np.empty(0)), dtype=np.float64)
    out, n_clamped, status, bad = k.simulate(
        policy.code, policy.alpha, float(getattr(policy, "c", 2.0)),
        float(getattr(policy, "upper", 1.0)), bb, sup_vals, sup_off, sup_len,
        T=T, checkpoints=np.asarray(record, dtype=np.intp),
        policy_gen=policy_rng.generator, arm_gens=[g.generator for g in arm_rngs], **arrays)
    if status == k.STATUS_TRACE_EXHAUSTED:
        raise TraceExhaustedError(f"trace for arm {bad} exhausted")
    if status == k.STATUS_OFF_SUPPORT:
        raise ConfigError(f"arm {bad} produced a reward outside its declared support")
    return out, int(n_clamped)


def run_replication(config: ExperimentConfig, instance: envmod.BanditEnv, policy,
                    rep_index: int, instance_index: int = 0,
                    backend: str | None = None) -> RegretTrace:
    """Play ``policy`` (a spec or a policy object) for ``config.horizon`` rounds."""
    if isinstance(policy, (PolicySpec, dict)):
        spec = policy if isinstance(policy, PolicySpec) else PolicySpec(**policy)
        policy = make_policy(spec, instance, config.alpha)
    T = config.horizon
    cps = np.asarray(config.checkpoints, dtype=np.int64)
    record = np.unique(np.append(cps, T))
    seed = config.seed
    policy_rng = RngStream.derive(seed, "policy", instance_index, rep_index, policy.name)
    arm_rngs = [RngStream.derive(seed, "reward", instance_index, rep_index, k)
                for k in range(instance.n_arms)]

    backend = backend or config.backend
    if backend == "cython" and _backend.compiled is None:
        raise ConfigError("compiled backend requested but not available")
    use_kernel = hasattr(policy, "code") and (
        backend == "cython" or (backend == "auto" and _backend.kernels is _backend.compiled))
    if use_kernel:
        counts, n_clamped = _play_kernel(instance, policy, T, record, policy_rng, arm_rngs)
    else:
        counts, n_clamped = _play_python(instance, policy, T, record, policy_rng, arm_rngs)
    if n_clamped:
        log.warning("%s: clamped %d rewards into the arm bounds", policy.name, n_clamped)
    keep = np.searchsorted(record, cps)
    cp_counts = counts[keep]
    regret = cp_counts @ instance.gaps
    return RegretTrace(cps, regret, cp_counts, counts[-1], n_clamped)


# ---------------------------------------------------------------------------
# experiment

@dataclass
class Report:
    config: ExperimentConfig
    checkpoints: np.ndarray
    policies: list[str]
    mean: dict          # policy -> (n_cp,)
    std: dict
    n_reps: dict
    mean_pulls: dict    # policy -> (K,)
    regret: dict = field(default_factory=dict, repr=False)   # policy -> (n_runs, n_cp)
    final_regret: dict = field(default_factory=dict, repr=False)


def _pooled_std(x: np.ndarray) -> np.ndarray:
    if x.shape[0] < 2:
        return np.zeros(x.shape[1])
    return x.std(axis=0, ddof=1)


def run_experiment(config: ExperimentConfig, threads: int | None = None) -> Report:
    """All (instance, replication, policy) tasks, reduced in task order."""
    threads = threads or config.threads
    instances = [build_instance(config, i) for i in range(config.n_instances)]
    tasks = [(i, r, p) for i in range(config.n_instances) for r in range(config.n_reps)
             for p in range(len(config.policies))]

    def work(task):
        i, r, p = task
        return run_replication(config, instances[i], config.policies[p], r, i)

    if threads == 1:
        results = [work(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(work, tasks))

    names = [p.name for p in config.policies]
    cps = np.asarray(config.checkpoints, dtype=np.int64)
    K = max(e.n_arms for e in instances)
    by_policy = {n: [] for n in names}
    pulls = {n: [] for n in names}
    final = {n: [] for n in names}
    for (i, r, p), tr in zip(tasks, results):
        n = names[p]
        by_policy[n].append(tr.regret)
        fc = np.zeros(K)
        fc[: tr.final_counts.size] = tr.final_counts
        pulls[n].append(fc)
        final[n].append(float(tr.final_counts @ instances[i].gaps))
    mean, std, nrep, mp, reg = {}, {}, {}, {}, {}
    for n in names:
        R = np.asarray(by_policy[n], dtype=np.float64).reshape(len(by_policy[n]), cps.size)
        reg[n] = R
        mean[n] = R.mean(axis=0) if cps.size else np.zeros(0)
        std[n] = _pooled_std(R) if cps.size else np.zeros(0)
        nrep[n] = R.shape[0]
        mp[n] = np.mean(pulls[n], axis=0)
    return Report(config, cps, names, mean, std, nrep, mp, reg,
                  {n: np.asarray(v) for n, v in final.items()})


# ---------------------------------------------------------------------------
# output

def version_string() -> str:
    try:
        desc = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                              cwd=Path(__file__).parent, capture_output=True, text=True,
                              timeout=5).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        desc = ""
    return f"{__version__}+g{desc}" if desc else __version__


def write_csv(report: Report, path) -> None:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        with (out / "regret.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["policy", "checkpoint", "mean", "std", "n_reps"])
            for n in report.policies:
                for j, c in enumerate(report.checkpoints):
                    w.writerow([n, int(c), repr(float(report.mean[n][j])),
                                repr(float(report.std[n][j])), report.n_reps[n]])
        with (out / "pulls.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["policy", "arm", "mean_pulls"])
            for n in report.policies:
                for k, v in enumerate(report.mean_pulls[n]):
                    w.writerow([n, k, repr(float(v))])
        meta = {
            "config": report.config.to_dict(),
            "seed": report.config.seed,
            "version": version_string(),
            "kernels": _backend.NAME,
            "regret": "pseudo-regret: sum_k gap_k * N_k(t)",
            "std_convention": STD_CONVENTION,
        }
        (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise ConfigError(f"cannot write results to {out}: {exc}") from exc


def read_regret_csv(path) -> dict[str, dict[str, np.ndarray]]:
    """Parse ``regret.csv`` back into ``{policy: {checkpoint, mean, std, n_reps}}``."""
    out: dict[str, dict[str, list]] = {}
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            d = out.setdefault(row["policy"], {"checkpoint": [], "mean": [], "std": [], "n_reps": []})
            d["checkpoint"].append(int(row["checkpoint"]))
            d["mean"].append(float(row["mean"]))
            d["std"].append(float(row["std"]))
            d["n_reps"].append(int(row["n_reps"]))
    return {p: {k: np.asarray(v) for k, v in d.items()} for p, d in out.items()}


def lower_bound_for_config(config: ExperimentConfig, T_grid=None):
    """Lower-bound curve of a fixed multinomial config, evaluated on its checkpoints."""
    from .kinf import lower_bound_curve

    if config.environment.get("type") != "fixed":
        raise ConfigError("lower bound needs a fixed-arm environment")
    env = build_instance(config, 0)
    dists = []
    for a in env.arms:
        if a.kind != envmod.MULTINOMIAL:
            raise ConfigError("lower bound needs multinomial arms")
        dists.append(a.dist)
    grid = np.asarray(T_grid if T_grid is not None else config.checkpoints, dtype=np.float64)
    return lower_bound_curve(dists, config.alpha, grid)
