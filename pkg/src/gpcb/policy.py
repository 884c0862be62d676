"""O'CLOK-UCB: GP upper-confidence indices fed to a combinatorial oracle.

Each round the indices ``mean + sqrt(beta_t) * std`` of all available arms
are computed against the posterior *before* the round, the oracle turns them
into a super arm, and the selected arms' outcomes update the posterior as
one batch.
"""

from dataclasses import dataclass, replace
from enum import Enum
import math
import time

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import ConfigError, GPCBError
from .gp import GPState, SparseGPState
from .kernels import KernelSpec
from .oracles import FeasibilityKind, oracle_alpha, solve


class OracleError(GPCBError, RuntimeError):
    """The oracle returned a super arm outside the feasible family."""


class Algorithm(str, Enum):
    OCLOK = "oclok"
    SOCLOK = "soclok"
    BENCHMARK = "benchmark"


@dataclass(frozen=True)
class PolicyConfig:
    delta: float = 0.05
    max_arms: int = 50
    budget: int = 3
    beta_override: float | None = None

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ConfigError(f"must lie in (0, 1), got {self.delta}", "policy.delta")
        if int(self.max_arms) != self.max_arms or self.max_arms < 1:
            raise ConfigError("must be a positive integer", "policy.max_arms")
        if int(self.budget) != self.budget or self.budget < 1:
            raise ConfigError("must be a positive integer", "policy.budget")
        if self.beta_override is not None and not self.beta_override >= 0:
            raise ConfigError("must be non-negative", "policy.beta_override")


def beta(t, cfg):
    """Confidence width ``2 log(M pi^2 t^2 / (3 delta))`` unless overridden."""
    if cfg.beta_override is not None:
        return float(cfg.beta_override)
    if t < 1:
        raise ValueError(f"rounds start at 1, got {t}")
    return 2.0 * math.log(cfg.max_arms * math.pi**2 * t * t / (3.0 * cfg.delta))


@dataclass(frozen=True, eq=False)
class IndexVector:
    index: np.ndarray
    mean: np.ndarray
    stddev: np.ndarray
    beta: float


def compute_indices(model, available, t, cfg):
    mean, var = model.predict(available)
    b = beta(t, cfg)
    sd = np.sqrt(var)
    return IndexVector(mean + math.sqrt(b) * sd, mean, sd, b)


def confidence_violations(indices, truth):
    """Arms whose true value lies outside ``mean +- sqrt(beta) * std``."""
    width = math.sqrt(indices.beta) * indices.stddev
    return int(np.count_nonzero(np.abs(np.asarray(truth) - indices.mean) > width))


def benchmark_round(instance, oracle=solve):
    """Clairvoyant super arm: the oracle applied to the true expected outcomes."""
    return oracle(instance.truth, instance.feasibility)


def check_feasible(superarm, instance):
    arms = np.asarray(superarm.arms, dtype=np.int64)
    feas = instance.feasibility
    ok = arms.size == 0 or (arms.min() >= 0 and arms.max() < instance.m
                            and np.unique(arms).size == arms.size)
    if feas.kind is FeasibilityKind.TOP_K:
        ok = ok and 1 <= arms.size <= feas.budget
    else:
        nodes = superarm.nodes
        ok = ok and len(set(nodes)) == len(nodes) <= feas.budget
        ok = ok and np.array_equal(arms, feas.graph.edges_of(nodes))
    if not ok:
        raise OracleError(f"infeasible super arm {superarm} in round {instance.t}")


@dataclass(frozen=True)
class RoundTraceEntry:
    round: int
    m_t: int
    selected_ids: tuple
    reward_realized: float
    reward_expected: float
    opt_expected: float
    benchmark_expected: float
    cum_regret: float
    beta: float
    wall_ms: float
    alpha: float = 1.0
    indices: IndexVector | None = None


@dataclass(frozen=True, eq=False)
class PolicyState:
    config: PolicyConfig
    model: GPState | SparseGPState | None
    algorithm: Algorithm = Algorithm.OCLOK
    t: int = 1
    cum_regret: float = 0.0
    num_inducing: int | None = None
    reseed_each_round: bool = True

    @classmethod
    def create(cls, config, kernel, noise_variance, algorithm="oclok",
               num_inducing=None, reseed_each_round=True, seed=0, dim=None):
        algorithm = Algorithm(algorithm)
        if algorithm is Algorithm.OCLOK:
            model = GPState.empty(kernel, noise_variance, dim)
        elif algorithm is Algorithm.SOCLOK:
            model = SparseGPState.empty(kernel, noise_variance, dim, seed=seed)
        else:
            model = None
        return cls(config, model, algorithm, num_inducing=num_inducing,
                   reseed_each_round=reseed_each_round)


def _refresh_inducing(state):
    model = state.model
    if state.algorithm is not Algorithm.SOCLOK or model.n == 0:
        return model
    s = model.n if state.num_inducing is None else state.num_inducing
    if state.reseed_each_round:
        return model.resample_inducing(s)
    return model.grow_inducing(s)


def run_round(state, instance, rng, oracle=solve, counter=None):
    """Play one round. Returns ``(super_arm, trace_entry, next_state)``.

    ``rng`` supplies the observation noise. ``oracle(values, feasibility)``
    must return a feasible :class:`SuperArm`.
    """
    start = time.perf_counter()
    cfg = state.config
    b = beta(state.t, cfg)
    model = _refresh_inducing(state)
    indices = None
    if state.algorithm is Algorithm.BENCHMARK:
        arm = benchmark_round(instance, oracle)
    else:
        indices = compute_indices(model, instance.contexts, state.t, cfg)
        if counter is not None:
            arm = oracle(indices.index, instance.feasibility, counter)
        else:
            arm = oracle(indices.index, instance.feasibility)
    check_feasible(arm, instance)
    sel = list(arm.arms)
    outcomes = instance.observe(sel, rng)
    if model is not None and sel:
        model = model.batch_update(instance.contexts[sel], outcomes)
    expected = instance.expected_reward(arm)
    opt, _ = instance.optimum()
    bench = instance.expected_reward(benchmark_round(instance, oracle))
    alpha = oracle_alpha(instance.feasibility)
    cum = state.cum_regret + alpha * opt - expected
    entry = RoundTraceEntry(
        round=state.t,
        m_t=instance.m,
        selected_ids=tuple(sel),
        reward_realized=instance.realized_reward(arm, outcomes),
        reward_expected=expected,
        opt_expected=opt,
        benchmark_expected=bench,
        cum_regret=cum,
        beta=b,
        wall_ms=(time.perf_counter() - start) * 1e3,
        alpha=alpha,
        indices=indices,
    )
    return arm, entry, replace(state, model=model, t=state.t + 1, cum_regret=cum)


def run_policy(state, rounds, rng, oracle=solve, counter=None):
    """Run every round in order; returns ``(entries, final_state)``."""
    entries = []
    for instance in rounds:
        _, entry, state = run_round(state, instance, rng, oracle, counter)
        entries.append(entry)
    return entries, state


class OClokUCB(BaseEstimator):
    """Estimator-style front end to :func:`run_round`.

    ``select`` proposes a super arm for a round, ``partial_fit`` feeds back
    the observed outcomes, and ``fit`` plays a whole sequence of rounds.
    Setting ``sparse=True`` gives the inducing-point variant.
    """

    def __init__(self, delta=0.05, max_arms=50, budget=3, beta_override=None,
                 kernel="se", lengthscale=1.0, nu=2.5, kernel_variance=1.0,
                 noise_variance=0.01, sparse=False, num_inducing=50,
                 reseed_each_round=True, random_state=0):
        self.delta = delta
        self.max_arms = max_arms
        self.budget = budget
        self.beta_override = beta_override
        self.kernel = kernel
        self.lengthscale = lengthscale
        self.nu = nu
        self.kernel_variance = kernel_variance
        self.noise_variance = noise_variance
        self.sparse = sparse
        self.num_inducing = num_inducing
        self.reseed_each_round = reseed_each_round
        self.random_state = random_state

    def _init_state(self):
        cfg = PolicyConfig(self.delta, self.max_arms, self.budget, self.beta_override)
        kernel = KernelSpec(self.kernel, self.lengthscale, self.nu, self.kernel_variance)
        self.state_ = PolicyState.create(
            cfg, kernel, self.noise_variance,
            algorithm=Algorithm.SOCLOK if self.sparse else Algorithm.OCLOK,
            num_inducing=self.num_inducing, reseed_each_round=self.reseed_each_round,
            seed=self.random_state or 0,
        )
        self.trace_ = []
        return self.state_

    def _state(self):
        if not hasattr(self, "state_"):
            self._init_state()
        return self.state_

    def index(self, X):
        """Indices of contexts ``X`` for the upcoming round."""
        state = self._state()
        model = _refresh_inducing(state)
        return compute_indices(model, X, state.t, state.config)

    def select(self, instance):
        state = self._state()
        return solve(self.index(instance.contexts).index, instance.feasibility)

    def partial_fit(self, contexts, outcomes):
        """Feed one round of semi-bandit feedback and advance the round counter."""
        state = self._state()
        model = _refresh_inducing(state).batch_update(contexts, outcomes)
        self.state_ = replace(state, model=model, t=state.t + 1)
        return self

    def fit(self, rounds, y=None):
        """Play every round of ``rounds``; noise comes from ``random_state``."""
        state = self._init_state()
        rng = np.random.default_rng(self.random_state)
        self.trace_, self.state_ = run_policy(state, rounds, rng)
        return self

    @property
    def cumulative_regret_(self):
        check_is_fitted(self, "trace_")
        return np.array([e.cum_regret for e in self.trace_])
