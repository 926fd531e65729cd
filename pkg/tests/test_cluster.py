import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from congestsp import cluster, oracle
from congestsp.cluster import RootedTree
from congestsp.graph import DisjointSet, WeightedGraph
from congestsp.partwise import OPERATORS, PartwiseEngine, bfs_tree_edges
from congestsp.sssp import tree_distances

from conftest import connected_graphs, make

# sample tree a-b, b-c, b-d, b-e, a-f rooted at a; ids chosen so that d is the minimum
A, B, C, D, E, F = 1, 2, 3, 0, 4, 5
NAMES = {A: "a", B: "b", C: "c", D: "d", E: "e", F: "f"}
COINS = [
    {A: True, B: False, C: False, D: True, E: True, F: False},
    {A: False, D: True, C: True, E: False},  # leaders of af, bd, c, e
    {D: False, C: True},  # leaders of abdef, c
]


def sample_tree():
    g = WeightedGraph.from_lengths(6, [(A, B, 1), (B, C, 1), (B, D, 1), (B, E, 1), (A, F, 1)])
    return g, RootedTree.from_edges(g, range(g.m), roots=[A])


def named_levels(h):
    out = []
    for lab in h.levels:
        groups = {}
        for v, c in enumerate(lab.tolist()):
            groups.setdefault(c, []).append(NAMES[v])
        out.append(sorted("".join(sorted(x)) for x in groups.values()))
    return out


def random_forest(rng, n, keep=0.85):
    g = make(f"er:{n}:0.2", seed=int(rng.integers(1 << 30))) if n > 1 else WeightedGraph(1, ())
    ds = DisjointSet(n)
    edges = [int(e) for e in rng.permutation(g.m) if rng.random() < keep and ds.union(*g.edges[e][:2])]
    roots = [int(r) for r in rng.permutation(n)[:3]]
    return g, RootedTree.from_edges(g, edges, roots=roots)


def test_sample_hierarchy():
    g, t = sample_tree()
    h = cluster.heads_tails(g, t, coins=lambda it, leader: COINS[it][leader])
    assert named_levels(h) == [
        ["a", "b", "c", "d", "e", "f"],
        ["af", "bd", "c", "e"],
        ["abdef", "c"],
        ["abcdef"],
    ]
    assert cluster.check_hierarchy(g, h) == []


def test_sample_subtree_counts():
    g, t = sample_tree()
    h = cluster.heads_tails(g, t, coins=lambda it, leader: COINS[it][leader])
    x = cluster.aggregate_subtree(g, h, [1] * 6)
    assert x[A] == 6 and x[B] == 4
    assert all(x[v] == 1 for v in (C, D, E, F))
    depth = cluster.aggregate_path_to_root(g, h, [1] * 6)
    assert depth == [int(t.depth[v]) + 1 for v in range(6)]


def test_single_vertex():
    g = WeightedGraph(1, ())
    t = RootedTree.from_edges(g, [])
    h = cluster.heads_tails(g, t, np.random.default_rng(0))
    assert h.depth == 0 and len(h.levels) == 1
    assert cluster.aggregate_subtree(g, h, [7]) == [7]


def test_rooted_tree_validation():
    g = make("grid:3")
    with pytest.raises(ValueError):
        RootedTree.from_edges(g, range(g.m))  # grid has cycles
    t = RootedTree.from_edges(g, bfs_tree_edges(g), roots=[4])
    t.validate()
    assert t.roots == [4]
    assert sum(len(c) for c in t.children()) == g.n - 1


def test_needs_randomness():
    g, t = sample_tree()
    with pytest.raises(ValueError):
        cluster.heads_tails(g, t)


def test_zero_values_stay_zero():
    g, t = sample_tree()
    h = cluster.heads_tails(g, t, np.random.default_rng(1))
    assert cluster.aggregate_subtree(g, h, [0] * 6) == [0] * 6
    assert cluster.aggregate_path_to_root(g, h, [5, 0, 0, 0, 0, 0])[A] == 0


@given(st.integers(1, 70), st.integers(0, 2**31), st.sampled_from(sorted(OPERATORS)))
def test_aggregates_match_recursive_oracles(n, seed, op):
    rng = np.random.default_rng(seed)
    g, t = random_forest(rng, n)
    h = cluster.heads_tails(g, t, rng)
    assert cluster.check_hierarchy(g, h) == []
    vals = [int(v) for v in rng.integers(0, 100, size=n)]
    assert cluster.aggregate_subtree(g, h, vals, op) == oracle.subtree_sums(t.parent, vals, op)
    assert cluster.aggregate_path_to_root(g, h, vals, op) == oracle.path_sums(t.parent, vals, op)


@given(connected_graphs(min_n=2, max_n=40), st.integers(0, 2**31))
def test_path_sums_give_tree_distances(g, seed):
    rng = np.random.default_rng(seed)
    ds = DisjointSet(g.n)
    edges = [int(e) for e in rng.permutation(g.m) if ds.union(*g.edges[e][:2])]
    t = RootedTree.from_edges(g, edges, roots=[0])
    x = [0 if v == 0 else g.edges[t.parent_edge[v]][2] for v in range(g.n)]
    h = cluster.heads_tails(g, t, rng)
    got = cluster.aggregate_path_to_root(g, h, x)
    assert got == tree_distances(g, edges, 0)


def test_depth_logarithmic_on_path():
    g = make("line:512")
    t = RootedTree.from_edges(g, range(g.m))
    rng = np.random.default_rng(5)
    depths = [cluster.heads_tails(g, t, rng).depth for _ in range(10)]
    assert max(depths) <= 32 + 40


@pytest.mark.parametrize("fidelity", ["accounted", "message"])
def test_engine_charges_and_agrees(fidelity):
    g = make("grid:6")
    t = RootedTree.from_edges(g, bfs_tree_edges(g))
    eng = PartwiseEngine(g, fidelity)
    h = cluster.heads_tails(g, t, np.random.default_rng(0), engine=eng)
    assert eng.rounds > 0 and h.rounds > 0
    ref = cluster.heads_tails(g, t, np.random.default_rng(0))
    assert all(np.array_equal(a, b) for a, b in zip(h.levels, ref.levels))
    vals = list(range(g.n))
    assert cluster.aggregate_subtree(g, h, vals, engine=eng) == oracle.subtree_sums(t.parent, vals)
    assert eng.violations == 0
