"""Seeded generators of volatile arm sets with hidden expected outcomes.

Three kinds are available:

``gp_synthetic``
    f is one draw from a zero-mean SE-kernel GP on a fixed grid of contexts;
    each round samples arms from the grid. Sum reward, Gaussian noise.
``crowdsourcing``
    worker/task contexts (distance, difficulty, battery) with
    ``f(x) = exp(-x1^2 / (2 * 0.4^2)) * sqrt(x2 * x3)``; reward
    ``log(1 + sum r)``.
``movie_coverage``
    random bipartite graphs whose edges are base arms with 1-d contexts and
    sigmoid activation probabilities; reward is the number of covered right
    nodes (probabilistic maximum coverage).

Rounds are drawn sequentially from one generator, so a run over the first T
rounds sees exactly the prefix of a longer run with the same seed.
"""

from dataclasses import asdict, dataclass, fields
from enum import Enum
import hashlib
import math

import numpy as np

from .exceptions import ConfigError, InputError
from .gp import cholesky_jitter
from .kernels import KernelSpec
from .oracles import (
    BipartiteGraph,
    FeasibilityKind,
    FeasibilitySpec,
    coverage_value,
    exhaustive_coverage_oracle,
    greedy_coverage_oracle,
    top_k_oracle,
)

CROWD_PDF_STD = 0.4
CROWD_MAX_DISTANCE = math.sqrt(0.5)
EXHAUSTIVE_OPT_LIMIT = 20_000


class EnvKind(str, Enum):
    GP_SYNTHETIC = "gp_synthetic"
    CROWDSOURCING = "crowdsourcing"
    MOVIE_COVERAGE = "movie_coverage"


class RewardKind(str, Enum):
    SUM = "sum"
    LOG_SUM = "log_sum"
    COVERAGE = "coverage"


@dataclass(frozen=True)
class EnvSpec:
    kind: EnvKind = EnvKind.GP_SYNTHETIC
    D: int = 3
    mean_arms: float = 20.0
    T: int = 100
    K: int = 3
    max_arms: int = 50
    noise_std: float = 0.1
    # gp_synthetic
    lengthscale: float = 1.0
    grid_size: int = 1000
    # movie_coverage
    mean_left: float = 12.0
    mean_right: float = 30.0
    edge_prob: float = 0.3
    context_beta: tuple = (1.0, 1.0)

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", EnvKind(self.kind))
        except ValueError:
            raise ConfigError(f"unknown environment kind {self.kind!r}", "env.kind") from None
        object.__setattr__(self, "context_beta", tuple(float(v) for v in self.context_beta))
        for name in ("D", "T", "K", "max_arms", "grid_size"):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) < 1:
                raise ConfigError("must be a positive integer", f"env.{name}")
        for name in ("mean_arms", "lengthscale", "mean_left", "mean_right"):
            if not getattr(self, name) > 0:
                raise ConfigError("must be positive", f"env.{name}")
        if self.noise_std < 0:
            raise ConfigError("must be non-negative", "env.noise_std")
        if not 0 < self.edge_prob <= 1:
            raise ConfigError("must be in (0, 1]", "env.edge_prob")
        if len(self.context_beta) != 2 or min(self.context_beta) <= 0:
            raise ConfigError("needs two positive Beta parameters", "env.context_beta")
        if self.kind is EnvKind.CROWDSOURCING and self.D != 3:
            raise ConfigError("crowdsourcing contexts are 3-dimensional", "env.D")
        if self.kind is EnvKind.MOVIE_COVERAGE and self.D != 1:
            raise ConfigError("movie edge contexts are 1-dimensional", "env.D")
        if self.kind is EnvKind.GP_SYNTHETIC and self.max_arms > self.grid_size:
            raise ConfigError("max_arms cannot exceed grid_size", "env.max_arms")

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)}", "env")
        return cls(**d)

    def to_dict(self):
        d = asdict(self)
        d["kind"] = self.kind.value
        d["context_beta"] = list(self.context_beta)
        return d


def crowdsourcing_f(x):
    """Expected worker quality for contexts (distance, difficulty, battery)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return np.exp(-0.5 * (x[:, 0] / CROWD_PDF_STD) ** 2) * np.sqrt(x[:, 1] * x[:, 2])


def movie_f(x):
    """Edge activation probability ``2 / (1 + exp(-4x)) - 1``."""
    x = np.asarray(x, dtype=float)
    return 2.0 / (1.0 + np.exp(-4.0 * x)) - 1.0


@dataclass(frozen=True, eq=False)
class RoundInstance:
    """One round: available arms, feasibility structure and hidden truth.

    Arm ``m`` has context ``contexts[m]`` and expected outcome ``truth[m]``.
    """

    t: int
    contexts: np.ndarray
    feasibility: FeasibilitySpec
    truth: np.ndarray
    noise_std: float
    reward: RewardKind = RewardKind.SUM
    bernoulli: bool = False

    @property
    def m(self):
        return self.contexts.shape[0]

    def observe(self, arms, rng):
        """Semi-bandit feedback: one noisy outcome per selected arm."""
        arms = np.asarray(arms, dtype=np.int64)
        f = self.truth[arms]
        if self.bernoulli:
            return (rng.random(arms.shape[0]) < f).astype(float)
        return f + self.noise_std * rng.standard_normal(arms.shape[0])

    def expected_reward(self, superarm, values=None):
        """u(values of the super arm); ``values`` defaults to the true f."""
        v = self.truth if values is None else np.asarray(values, dtype=float)
        if self.reward is RewardKind.COVERAGE:
            return coverage_value(v, superarm.nodes, self.feasibility.graph)
        total = float(np.sum(v[list(superarm.arms)]))
        if self.reward is RewardKind.LOG_SUM:
            return math.log1p(total)
        return total

    def realized_reward(self, superarm, outcomes):
        outcomes = np.asarray(outcomes, dtype=float)
        if self.reward is RewardKind.COVERAGE:
            edges = self.feasibility.graph.edges[list(superarm.arms)]
            return float(np.unique(edges[outcomes > 0.5, 1]).shape[0])
        total = float(np.sum(outcomes))
        if self.reward is RewardKind.LOG_SUM:
            return math.log1p(max(total, 0.0))
        return total

    def optimum(self):
        """(opt(f_t), exact?) -- coverage falls back to greedy when enumeration is too large."""
        if self.reward is not RewardKind.COVERAGE:
            K = min(self.feasibility.budget, self.m)
            return self.expected_reward(top_k_oracle(self.truth, K)), True
        g = self.feasibility.graph
        K = min(self.feasibility.budget, g.n_left)
        if math.comb(g.n_left, K) <= EXHAUSTIVE_OPT_LIMIT:
            best = exhaustive_coverage_oracle(self.truth, K, g, EXHAUSTIVE_OPT_LIMIT)
            return self.expected_reward(best), True
        return self.expected_reward(greedy_coverage_oracle(self.truth, K, g)), False


class Environment:
    """A generated arrival sequence. Iterating yields :class:`RoundInstance` s."""

    def __init__(self, spec, seed, rounds, clamp_events=0, grid=None, grid_f=None):
        self.spec = spec
        self.seed = seed
        self.rounds = list(rounds)
        self.clamp_events = clamp_events
        self.grid = grid
        self.grid_f = grid_f

    def __iter__(self):
        return iter(self.rounds)

    def __len__(self):
        return len(self.rounds)

    def __getitem__(self, i):
        return self.rounds[i]

    def truncate(self, T):
        return Environment(self.spec, self.seed, self.rounds[:T], self.clamp_events,
                           self.grid, self.grid_f)

    def content_hash(self):
        h = hashlib.sha256()
        for r in self.rounds:
            h.update(np.int64(r.t).tobytes())
            h.update(np.ascontiguousarray(r.contexts).tobytes())
            h.update(np.ascontiguousarray(r.truth).tobytes())
            if r.feasibility.graph is not None:
                h.update(r.feasibility.graph.edges.tobytes())
        return h.hexdigest()


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _arrivals(rng, mean, lo, hi):
    n = int(rng.poisson(mean))
    clamped = int(np.clip(n, lo, hi))
    return clamped, clamped != n


def sample_gp_function(contexts, lengthscale, rng, variance=1.0):
    """One joint draw of a zero-mean SE-kernel GP at the given contexts."""
    K = KernelSpec("se", lengthscale, variance=variance)(contexts)
    L = cholesky_jitter(K)
    return L @ rng.standard_normal(contexts.shape[0])


def gp_synthetic_env(spec, seed):
    if spec.kind is not EnvKind.GP_SYNTHETIC:
        raise InputError(f"spec kind is {spec.kind.value}, not gp_synthetic")
    rng = _rng(seed)
    grid = rng.random((spec.grid_size, spec.D))
    f = sample_gp_function(grid, spec.lengthscale, rng)
    feas = FeasibilitySpec(FeasibilityKind.TOP_K, spec.K)
    rounds, clamps = [], 0
    for t in range(1, spec.T + 1):
        m, hit = _arrivals(rng, spec.mean_arms, 1, spec.max_arms)
        clamps += hit
        idx = rng.choice(spec.grid_size, size=m, replace=False)
        rounds.append(RoundInstance(t, grid[idx], feas, f[idx], spec.noise_std, RewardKind.SUM))
    return Environment(spec, seed, rounds, clamps, grid, f)


def _workers_near(rng, task, n):
    out = np.empty((0, 2))
    while out.shape[0] < n:
        cand = rng.random((2 * n, 2))
        d = np.linalg.norm(cand - task, axis=1)
        out = np.vstack([out, cand[d < CROWD_MAX_DISTANCE]])
    return out[:n]


def crowdsourcing_env(spec, seed):
    if spec.kind is not EnvKind.CROWDSOURCING:
        raise InputError(f"spec kind is {spec.kind.value}, not crowdsourcing")
    rng = _rng(seed)
    feas = FeasibilitySpec(FeasibilityKind.TOP_K, spec.K)
    rounds, clamps = [], 0
    for t in range(1, spec.T + 1):
        task = rng.random(2)
        difficulty = rng.random()
        m, hit = _arrivals(rng, spec.mean_arms, 1, spec.max_arms)
        clamps += hit
        loc = _workers_near(rng, task, m)
        battery = rng.random(m)
        dist = np.linalg.norm(loc - task, axis=1) / CROWD_MAX_DISTANCE
        X = np.column_stack([dist, np.full(m, difficulty), battery])
        rounds.append(RoundInstance(t, X, feas, crowdsourcing_f(X), spec.noise_std,
                                    RewardKind.LOG_SUM))
    return Environment(spec, seed, rounds, clamps)


def movie_coverage_env(spec, seed):
    if spec.kind is not EnvKind.MOVIE_COVERAGE:
        raise InputError(f"spec kind is {spec.kind.value}, not movie_coverage")
    rng = _rng(seed)
    a, b = spec.context_beta
    rounds, clamps = [], 0
    for t in range(1, spec.T + 1):
        n_left = int(rng.poisson(spec.mean_left))
        n_right = int(rng.poisson(spec.mean_right))
        clamps += (n_left < spec.K) + (n_right < 1)
        n_left, n_right = max(n_left, spec.K), max(n_right, 1)
        mask = rng.random((n_left, n_right)) < spec.edge_prob
        if not mask.any():
            mask[0, 0] = True
            clamps += 1
        edges = np.argwhere(mask)
        if edges.shape[0] > spec.max_arms:
            keep = np.sort(rng.choice(edges.shape[0], size=spec.max_arms, replace=False))
            edges = edges[keep]
            clamps += 1
        x = rng.beta(a, b, size=edges.shape[0])
        graph = BipartiteGraph(n_left, n_right, edges)
        feas = FeasibilitySpec(FeasibilityKind.COVERAGE, spec.K, graph)
        rounds.append(RoundInstance(t, x[:, None], feas, movie_f(x), 0.0,
                                    RewardKind.COVERAGE, bernoulli=True))
    return Environment(spec, seed, rounds, clamps)


GENERATORS = {
    EnvKind.GP_SYNTHETIC: gp_synthetic_env,
    EnvKind.CROWDSOURCING: crowdsourcing_env,
    EnvKind.MOVIE_COVERAGE: movie_coverage_env,
}


def make_environment(spec, seed):
    return GENERATORS[spec.kind](spec, seed)


__all__ = [
    "EnvKind", "EnvSpec", "RewardKind", "RoundInstance", "Environment",
    "crowdsourcing_f", "movie_f", "gp_synthetic_env", "crowdsourcing_env",
    "movie_coverage_env", "make_environment", "sample_gp_function",
]
