from itertools import combinations
import math

import numpy as np
import pytest

from gpcb.exceptions import InputError
from gpcb.oracles import (
    BipartiteGraph,
    ClampCounter,
    coverage_value,
    exhaustive_coverage_oracle,
    greedy_coverage_oracle,
    top_k_oracle,
)


def brute_top_k(values, K):
    # among optimal subsets the lowest-id tie-break yields the lexicographically smallest
    subsets = list(combinations(range(len(values)), K))
    best = max(sum(values[i] for i in S) for S in subsets)
    return min(S for S in subsets if sum(values[i] for i in S) >= best - 1e-12)


def brute_coverage_opt(p, K, graph):
    return max(coverage_value(p, S, graph) for S in combinations(range(graph.n_left), K))


def random_graph(rng, n_left, n_right, density=0.5):
    mask = rng.random((n_left, n_right)) < density
    if not mask.any():
        mask[0, 0] = True
    return BipartiteGraph(n_left, n_right, np.argwhere(mask))


def test_top_k_example():
    assert top_k_oracle([0.3, 0.9, 0.1, 0.5], 2).arms == (1, 3)


def test_top_k_ties_go_to_lowest_id():
    assert top_k_oracle([0.4] * 5, 2).arms == (0, 1)
    assert top_k_oracle([0.1, 0.5, 0.5, 0.5], 2).arms == (1, 2)


def test_top_k_rejects_oversized_budget():
    with pytest.raises(InputError):
        top_k_oracle([0.1, 0.2], 3)


def test_top_k_equals_exhaustive():
    rng = np.random.default_rng(0)
    for _ in range(500):
        m = rng.integers(1, 13)
        K = rng.integers(1, min(4, m) + 1)
        v = rng.random(m)
        if rng.random() < 0.3:
            v = np.round(v, 1)  # force ties
        got = top_k_oracle(v, K).arms
        assert sum(v[list(got)]) == pytest.approx(max(sum(v[list(S)])
                                                      for S in combinations(range(m), K)))
        assert got == brute_top_k(v, K)


def test_coverage_single_edge():
    g = BipartiteGraph(1, 1, [[0, 0]])
    assert coverage_value([0.37], [0], g) == pytest.approx(0.37)


def test_coverage_two_edges_into_one_node():
    g = BipartiteGraph(2, 1, [[0, 0], [1, 0]])
    assert coverage_value([0.5, 0.5], [0, 1], g) == pytest.approx(0.75)
    assert coverage_value([0.5, 0.5], [], g) == 0.0


def test_coverage_matches_monte_carlo():
    rng = np.random.default_rng(1)
    g = random_graph(rng, 3, 3, density=0.7)
    p = rng.random(g.n_edges)
    S = [0, 2]
    value = coverage_value(p, S, g)
    sel = g.edges_of(S)
    draws = 1_000_000
    active = rng.random((draws, sel.size)) < p[sel]
    covered = np.zeros((draws, g.n_right), dtype=bool)
    for col, e in enumerate(sel):
        covered[:, g.edges[e, 1]] |= active[:, col]
    counts = covered.sum(axis=1)
    se = counts.std() / math.sqrt(draws)
    assert abs(counts.mean() - value) <= 3 * se


def test_coverage_clamps_out_of_range_values():
    g = BipartiteGraph(2, 2, [[0, 0], [1, 1]])
    counter = ClampCounter()
    assert coverage_value([1.7, -0.2], [0, 1], g, counter) == pytest.approx(1.0)
    assert counter.clamped == 2


def test_greedy_prefers_wider_coverage():
    # node 0: one edge 0.9; node 1: two disjoint edges 0.5 each
    g = BipartiteGraph(2, 3, [[0, 0], [1, 1], [1, 2]])
    arm = greedy_coverage_oracle([0.9, 0.5, 0.5], 1, g)
    assert arm.nodes == (1,) and arm.arms == (1, 2)
    assert coverage_value([0.9, 0.5, 0.5], [1], g) > coverage_value([0.9, 0.5, 0.5], [0], g)


def test_greedy_with_all_left_nodes_covers_everything():
    rng = np.random.default_rng(2)
    g = random_graph(rng, 5, 7)
    p = rng.random(g.n_edges)
    arm = greedy_coverage_oracle(p, 5, g)
    assert sorted(arm.nodes) == list(range(5))
    assert coverage_value(p, arm.nodes, g) == pytest.approx(coverage_value(p, range(5), g))


def test_greedy_empty_graph():
    arm = greedy_coverage_oracle([], 2, BipartiteGraph(0, 0, np.zeros((0, 2))))
    assert arm.arms == () and arm.nodes == ()


def test_greedy_ratio_on_four_node_graphs():
    rng = np.random.default_rng(3)
    for _ in range(200):
        g = random_graph(rng, 4, rng.integers(1, 7))
        p = rng.random(g.n_edges)
        opt = brute_coverage_opt(p, 2, g)
        got = coverage_value(p, greedy_coverage_oracle(p, 2, g).nodes, g)
        assert got >= (1 - 1 / math.e) * opt - 1e-12


def test_greedy_ratio_up_to_ten_left_nodes():
    rng = np.random.default_rng(4)
    for _ in range(100):
        n_left = rng.integers(2, 11)
        g = random_graph(rng, n_left, rng.integers(1, 12), density=rng.uniform(0.1, 0.8))
        p = rng.random(g.n_edges)
        K = rng.integers(1, min(4, n_left) + 1)
        opt = coverage_value(p, exhaustive_coverage_oracle(p, K, g).nodes, g)
        assert opt == pytest.approx(brute_coverage_opt(p, K, g))
        got = coverage_value(p, greedy_coverage_oracle(p, K, g).nodes, g)
        assert got >= (1 - 1 / math.e) * opt - 1e-12


def test_oracles_are_deterministic():
    rng = np.random.default_rng(5)
    g = random_graph(rng, 8, 10)
    p = np.round(rng.random(g.n_edges), 1)
    assert greedy_coverage_oracle(p, 3, g) == greedy_coverage_oracle(p.copy(), 3, g)
    v = np.round(rng.random(12), 1)
    assert top_k_oracle(v, 4) == top_k_oracle(v.copy(), 4)


def test_raising_one_value_never_lowers_achieved_objective():
    rng = np.random.default_rng(6)
    for _ in range(100):
        v = rng.random(10)
        w = v.copy()
        w[rng.integers(10)] += rng.random()
        before = v[list(top_k_oracle(v, 3).arms)].sum()
        after = w[list(top_k_oracle(w, 3).arms)].sum()
        assert after >= before

        g = random_graph(rng, 6, 8)
        p = rng.random(g.n_edges) * 0.8
        q = p.copy()
        q[rng.integers(g.n_edges)] += 0.2 * rng.random()
        before = coverage_value(p, greedy_coverage_oracle(p, 2, g).nodes, g)
        after = coverage_value(q, greedy_coverage_oracle(q, 2, g).nodes, g)
        assert after >= before - 1e-12
