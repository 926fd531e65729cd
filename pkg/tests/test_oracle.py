import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from congestsp import oracle
from congestsp.graph import SCALE, WeightedGraph, dijkstra
from congestsp.partwise import AggregateSpec, ValidPartition

from conftest import connected_graphs, make, random_connected


def test_triangle_apsp():
    g = WeightedGraph.from_lengths(3, [(0, 1, 1), (1, 2, 2), (0, 2, 5)])
    assert (oracle.apsp(g) // SCALE).tolist() == [[0, 1, 3], [1, 0, 2], [3, 2, 0]]


def test_apsp_disk_cache(tmp_path, monkeypatch):
    monkeypatch.setenv(oracle.CACHE_ENV, str(tmp_path))
    g = make("grid:5", weights="int:1:7", seed=11)
    oracle._apsp_cached.cache_clear()
    a = oracle.apsp(g)
    assert list(tmp_path.glob("apsp-*.npy"))
    oracle._apsp_cached.cache_clear()
    assert np.array_equal(oracle.apsp(g), a)


def test_caps_refuse():
    g = make("line:20")
    with pytest.raises(oracle.OracleRefused):
        oracle.apsp(g, cap=10)
    with pytest.raises(oracle.OracleRefused):
        oracle.min_cost_flow(g, [0] * 20, cap=10)


def test_dijkstra_vs_bellman_ford_n64():
    g = random_connected(np.random.default_rng(64), 64, 0.1, wmax=50)
    table = oracle.apsp(g)
    for s in range(0, 64, 7):
        assert table[s].tolist() == oracle.bellman_ford(g, s)


def test_two_vertex_flow():
    g = WeightedGraph.from_lengths(2, [(0, 1, 5)])
    sol = oracle.min_cost_flow(g, [3 * SCALE, -3 * SCALE])
    assert sol.cost == 3 * SCALE * 5 * SCALE
    assert sol.flow == {0: 3 * SCALE}


@given(connected_graphs(min_n=2, max_n=20, wmax=9), st.integers(0, 2**31))
def test_flow_matches_networkx(g, seed):
    rng = np.random.default_rng(seed)
    dem = [int(x) for x in rng.integers(-3, 4, size=g.n)]
    dem[0] -= sum(dem)
    sol = oracle.min_cost_flow(g, [d * SCALE for d in dem])
    G = nx.DiGraph()
    for v in range(g.n):
        G.add_node(v, demand=-dem[v])
    for u, v, w in g.edges:
        G.add_edge(u, v, weight=w // SCALE)
        G.add_edge(v, u, weight=w // SCALE)
    assert sol.cost == nx.min_cost_flow_cost(G) * SCALE * SCALE
    assert oracle.conservation_violations(g, [d * SCALE for d in dem], sol.flow) == []
    assert not oracle.has_negative_residual_cycle(g, sol.flow)


def test_flow_restricted_to_edges():
    g = WeightedGraph.from_lengths(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)])
    dem = [SCALE, 0, -SCALE]
    assert oracle.min_cost_flow(g, dem).cost == SCALE * SCALE
    sol = oracle.min_cost_flow(g, dem, edge_ids=[g.eid(0, 1), g.eid(1, 2)])
    assert sol.cost == 2 * SCALE * SCALE
    assert oracle.has_negative_residual_cycle(g, sol.flow)


def test_unbalanced_demands_rejected():
    with pytest.raises(ValueError):
        oracle.min_cost_flow(make("line:3"), [1, 0, 0])


def test_direct_reduce():
    p = ValidPartition.from_labels([0, 0, 1, -1])
    assert oracle.direct_reduce(p, AggregateSpec((1, 2, 3, 4), "sum")) == [3, 3]


def test_recursive_tree_oracles():
    parent = [-1, 0, 0, 1, -1, 4]
    assert oracle.subtree_sums(parent, [1] * 6) == [4, 2, 1, 1, 2, 1]
    assert oracle.path_sums(parent, [1, 2, 3, 4, 5, 6]) == [1, 3, 4, 7, 5, 11]
    assert oracle.subtree_sums(parent, [3, 1, 5, 2, 0, 9], "max") == [5, 2, 5, 2, 9, 9]


def test_report():
    r = oracle.OracleReport("tree distance", 10, 15)
    assert r.ratio == 1.5 and r.verdict
    assert not oracle.OracleReport("tree distance", 10, 9).verdict


def test_bellman_ford_zero_weights():
    g = make("line:4")
    assert oracle.bellman_ford(g, 0, [0, SCALE, 0]) == dijkstra(g, 0, np.array([0, SCALE, 0])).dist.tolist()
