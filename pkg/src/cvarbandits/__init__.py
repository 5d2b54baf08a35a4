"""CVaR multi-armed bandits: Thompson Sampling and UCB policies, a Kinf solver and an experiment harness."""
from __future__ import annotations

__version__ = "0.1.0"

from ._backend import NAME as KERNELS
from .dist import DiscreteDist, cvar, cvar_sup_oracle, empirical_cvar, levy_distance, sup_distance
from .env import BanditEnv, MultinomialArm, TgmArm, TraceArm, pull, true_cvar
from .errors import ConfigError, SolverError, TraceExhaustedError
from .harness import ExperimentConfig, run_experiment, run_replication, write_csv
from .kinf import KinfResult, kinf_dual, kinf_grid_oracle, lower_bound_curve, pinsker_floor
from .policies import BcvtsPolicy, CvarUcbPolicy, McvtsPolicy, UniformPolicy, UUcbPolicy
from .rng import RngStream, TgmParams, dirichlet, sample_discrete, sample_tgm, uniform_simplex
