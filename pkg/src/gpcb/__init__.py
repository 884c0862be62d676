"""Combinatorial volatile bandits with Gaussian-process UCB indices."""

__version__ = "0.1.0"

from .exceptions import ConfigError, InputError, InstanceTooLargeError, NumericalError
from .kernels import KernelSpec, gram_matrix, kernel_eval
from .gp import GPRegressor, GPState, SparseGPRegressor, SparseGPState
from .oracles import (
    BipartiteGraph,
    FeasibilityKind,
    FeasibilitySpec,
    SuperArm,
    coverage_value,
    greedy_coverage_oracle,
    top_k_oracle,
)
from .policy import OClokUCB, PolicyConfig, PolicyState, beta, compute_indices, run_round
from .environments import EnvSpec, make_environment
from .metrics import alpha_regret, gamma_diagnostics, info_gain

__all__ = [
    "ConfigError", "InputError", "InstanceTooLargeError", "NumericalError",
    "KernelSpec", "gram_matrix", "kernel_eval",
    "GPRegressor", "GPState", "SparseGPRegressor", "SparseGPState",
    "BipartiteGraph", "FeasibilityKind", "FeasibilitySpec", "SuperArm",
    "coverage_value", "greedy_coverage_oracle", "top_k_oracle",
    "OClokUCB", "PolicyConfig", "PolicyState", "beta", "compute_indices", "run_round",
    "EnvSpec", "make_environment",
    "alpha_regret", "gamma_diagnostics", "info_gain",
]
