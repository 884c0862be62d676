"""Deterministic combinatorial oracles.

Every oracle breaks ties toward the lowest base-arm (or node) id, so the
same inputs always produce the same super arm.
"""

from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
import logging
import math

import numpy as np

from .exceptions import InputError

logger = logging.getLogger(__name__)

GREEDY_COVERAGE_ALPHA = 1.0 - 1.0 / math.e


class FeasibilityKind(str, Enum):
    TOP_K = "top_k"
    COVERAGE = "coverage"


@dataclass(frozen=True, eq=False)
class BipartiteGraph:
    """Left/right node counts plus an (E, 2) edge array; edge e is base arm e."""

    n_left: int
    n_right: int
    edges: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (
            edges[:, 0].min() < 0 or edges[:, 0].max() >= self.n_left
            or edges[:, 1].min() < 0 or edges[:, 1].max() >= self.n_right
        ):
            raise InputError("edge endpoint out of range")
        object.__setattr__(self, "edges", edges)

    @property
    def n_edges(self):
        return self.edges.shape[0]

    def edges_of(self, nodes):
        """Ids of all edges leaving the given left nodes, ascending."""
        mask = np.isin(self.edges[:, 0], np.asarray(list(nodes), dtype=np.int64))
        return np.flatnonzero(mask)


@dataclass(frozen=True)
class FeasibilitySpec:
    kind: FeasibilityKind
    budget: int
    graph: BipartiteGraph | None = None

    def __post_init__(self):
        if self.budget < 1:
            raise InputError("budget must be at least 1")
        if self.kind is FeasibilityKind.COVERAGE and self.graph is None:
            raise InputError("coverage feasibility requires a graph")


@dataclass(frozen=True)
class SuperArm:
    """Selected base-arm ids (ascending); ``nodes`` lists chosen left nodes in pick order."""

    arms: tuple
    nodes: tuple = ()

    def __len__(self):
        return len(self.arms)


@dataclass
class ClampCounter:
    """Counts index values clamped into [0, 1] before use as probabilities."""

    clamped: int = 0
    calls: int = field(default=0, repr=False)


def _clamp_probs(p, counter=None):
    p = np.asarray(p, dtype=float)
    out = np.clip(p, 0.0, 1.0)
    n = int(np.count_nonzero(out != p))
    if counter is not None:
        counter.calls += 1
        counter.clamped += n
    if n:
        logger.debug("clamped %d probabilities into [0, 1]", n)
    return out


def top_k_oracle(values, K):
    """The K largest values, ties to the lowest id. Exact for additive rewards."""
    values = np.asarray(values, dtype=float).reshape(-1)
    if K < 1 or K > values.shape[0]:
        raise InputError(f"K={K} not in [1, {values.shape[0]}]")
    order = np.lexsort((np.arange(values.shape[0]), -values))
    return SuperArm(tuple(int(i) for i in np.sort(order[:K])))


def coverage_value(edge_probs, S, graph, counter=None):
    """Expected number of right nodes activated by the left-node set ``S``.

    Each selected edge (i, j) activates j independently with probability
    ``edge_probs[e]``; right node j is covered with probability
    ``1 - prod(1 - p)`` over its selected edges.
    """
    p = _clamp_probs(edge_probs, counter)
    if p.shape[0] != graph.n_edges:
        raise InputError(f"got {p.shape[0]} probabilities for {graph.n_edges} edges")
    S = list(S)
    if any(i < 0 or i >= graph.n_left for i in S):
        raise InputError("S contains an unknown left node")
    sel = graph.edges_of(S)
    if sel.size == 0:
        return 0.0
    log_miss = np.zeros(graph.n_right)
    # log1p(-1) = -inf is fine: exp(-inf) = 0
    with np.errstate(divide="ignore"):
        np.add.at(log_miss, graph.edges[sel, 1], np.log1p(-p[sel]))
    return float(np.sum(1.0 - np.exp(log_miss)))


def greedy_coverage_oracle(edge_probs, K, graph, counter=None):
    """Greedy marginal-gain maximization of :func:`coverage_value`.

    Coverage is monotone submodular with value 0 at the empty set, so the
    result is within ``1 - 1/e`` of the optimum.
    """
    p = _clamp_probs(edge_probs, counter)
    if p.shape[0] != graph.n_edges:
        raise InputError(f"got {p.shape[0]} probabilities for {graph.n_edges} edges")
    if graph.n_left == 0 or graph.n_edges == 0:
        return SuperArm((), ())
    if K > graph.n_left:
        raise InputError(f"K={K} exceeds {graph.n_left} left nodes")
    left, right = graph.edges[:, 0], graph.edges[:, 1]
    with np.errstate(divide="ignore"):
        log_keep = np.log1p(-p)
    # per left node, the log-miss it contributes to each right node
    contrib = np.zeros((graph.n_left, graph.n_right))
    np.add.at(contrib, (left, right), log_keep)
    miss = np.ones(graph.n_right)
    chosen = []
    available = np.ones(graph.n_left, dtype=bool)
    for _ in range(K):
        gains = (miss[None, :] * (1.0 - np.exp(contrib))).sum(axis=1)
        gains[~available] = -np.inf
        best = int(np.argmax(gains))  # first maximum = lowest id
        chosen.append(best)
        available[best] = False
        miss = miss * np.exp(contrib[best])
    arms = graph.edges_of(chosen)
    return SuperArm(tuple(int(a) for a in arms), tuple(chosen))


def exhaustive_coverage_oracle(edge_probs, K, graph, max_subsets=200_000):
    """Optimal left-node set by enumeration; lowest-lexicographic set on ties."""
    if graph.n_left == 0 or graph.n_edges == 0:
        return SuperArm((), ())
    K = min(K, graph.n_left)
    if math.comb(graph.n_left, K) > max_subsets:
        raise InputError(f"C({graph.n_left}, {K}) subsets exceeds {max_subsets}")
    p = np.clip(np.asarray(edge_probs, dtype=float), 0.0, 1.0)
    best, best_val = None, -np.inf
    for S in combinations(range(graph.n_left), K):
        v = coverage_value(p, S, graph)
        if v > best_val + 1e-12:
            best, best_val = S, v
    return SuperArm(tuple(int(a) for a in graph.edges_of(best)), tuple(best))


def solve(values, feasibility, counter=None):
    """Dispatch to the oracle matching ``feasibility.kind``."""
    if feasibility.kind is FeasibilityKind.TOP_K:
        return top_k_oracle(values, min(feasibility.budget, len(values)))
    K = min(feasibility.budget, feasibility.graph.n_left)
    return greedy_coverage_oracle(values, K, feasibility.graph, counter)


def oracle_alpha(feasibility):
    if feasibility.kind is FeasibilityKind.TOP_K:
        return 1.0
    return GREEDY_COVERAGE_ALPHA
