import numpy as np
import pytest

from congestsp import oracle, transshipment
from congestsp.cluster import RootedTree
from congestsp.graph import SCALE, WeightedGraph
from congestsp.partwise import PartwiseEngine, bfs_tree_edges
from congestsp.sssp import AlgorithmConstants

from conftest import make, random_connected

K = AlgorithmConstants()


def rand_demands(rng, n, k=5):
    d = [int(x) * SCALE for x in rng.integers(-k, k + 1, size=n)]
    d[0] -= sum(d)
    return d


def test_zero_demands():
    g = make("grid:4")
    flow = transshipment.route_on_tree(g, bfs_tree_edges(g), [0] * g.n, np.random.default_rng(0))
    assert flow.cost == 0 and set(flow.F) == {0}


def test_two_vertices():
    g = WeightedGraph.from_lengths(2, [(0, 1, 5)])
    flow = transshipment.expected_ts(g, [SCALE, -SCALE], 0.5, K, np.random.default_rng(0))
    assert flow.F == [0, -SCALE]  # vertex 1 pushes -1 to the root, i.e. receives one unit
    assert flow.cost == 5 == oracle.min_cost_flow(g, [SCALE, -SCALE]).cost / SCALE**2
    boosted = transshipment.boosted_ts(g, [SCALE, -SCALE], 0.5, K, np.random.default_rng(0))
    assert boosted.cost == flow.cost


def test_star_matches_tree_oracle():
    g = make("star:5")
    dem = [0, SCALE, SCALE, -SCALE, -SCALE]
    flow = transshipment.route_on_tree(g, range(g.m), dem, np.random.default_rng(1))
    assert flow.cost_units == oracle.min_cost_flow(g, dem, edge_ids=range(g.m)).cost


def test_demands_must_balance():
    g = make("line:3")
    with pytest.raises(ValueError):
        transshipment.expected_ts(g, [SCALE, 0, 0], 0.5, K, np.random.default_rng(0))
    with pytest.raises(ValueError):
        transshipment.expected_ts(g, [0, 0], 0.5, K, np.random.default_rng(0))


def test_non_spanning_tree_rejected():
    g = make("line:4")
    with pytest.raises(transshipment.NonSpanningForest):
        transshipment.route_on_tree(g, [0, 2], [0] * 4, np.random.default_rng(0))


def test_boosted_is_min_of_runs():
    g = make("er:40:0.1", weights="int:1:9", seed=6)
    rng = np.random.default_rng(6)
    flow = transshipment.boosted_ts(g, rand_demands(rng, g.n), 0.25, K, rng)
    assert len(flow.extra["run_costs"]) == K.repetitions(g.n)
    assert flow.cost_units == min(flow.extra["run_costs"])


def test_flow_valid_and_bounded_below():
    for s in range(5):
        rng = np.random.default_rng(s)
        g = random_connected(rng, 40, 0.08)
        dem = rand_demands(rng, g.n)
        flow = transshipment.expected_ts(g, dem, 0.25, K, rng)
        edge_flow = flow.edge_flow(g)
        verdict = transshipment.tree_flow_optimality_check(g, flow.tree, dem, edge_flow)
        assert verdict.ok, verdict.detail
        assert flow.cost_units >= oracle.min_cost_flow(g, dem).cost
        assert flow.cost_units == oracle.min_cost_flow(g, dem, edge_ids=flow.tree).cost


def test_perturbation_breaks_conservation():
    g = make("grid:4")
    rng = np.random.default_rng(2)
    dem = rand_demands(rng, g.n)
    flow = transshipment.route_on_tree(g, bfs_tree_edges(g), dem, rng)
    ef = flow.edge_flow(g)
    e = next(iter(ef))
    ef[e] += 1
    verdict = transshipment.tree_flow_optimality_check(g, flow.tree, dem, ef)
    assert not verdict.ok and len(verdict.violations) == 2
    assert "vertex" in verdict.detail
    off = dict(flow.edge_flow(g))
    spare = next(e for e in range(g.m) if e not in flow.tree)
    off[spare] = 0
    assert transshipment.tree_flow_optimality_check(g, flow.tree, dem, off).ok


def test_subtree_sums_and_split_imbalance():
    g = make("er:50:0.1", seed=8)
    rng = np.random.default_rng(8)
    dem = rand_demands(rng, g.n)
    tree = bfs_tree_edges(g, 0)
    flow = transshipment.route_on_tree(g, tree, dem, rng)
    t = RootedTree.from_edges(g, tree, roots=[0])
    sums = oracle.subtree_sums(t.parent, dem)
    assert flow.F[1:] == sums[1:]
    for v in range(1, g.n):
        inside = sums[v]
        outside = sum(dem) - inside
        assert abs(2 * flow.F[v]) == abs(inside - outside)


def test_engine_rounds_charged():
    g = make("grid:5")
    eng = PartwiseEngine(g, "accounted")
    rng = np.random.default_rng(3)
    flow = transshipment.expected_ts(g, rand_demands(rng, g.n), 0.25, K, rng, engine=eng)
    assert flow.rounds > 0 and flow.rounds == eng.rounds


def test_format_flow(tmp_path):
    g = make("line:3")
    flow = transshipment.route_on_tree(g, [0, 1], [SCALE, SCALE // 2, -3 * SCALE // 2], np.random.default_rng(0))
    assert transshipment.format_flow(g, flow) == "1 0 -1\n2 1 -1.5\n"
    transshipment.store_flow(g, flow, tmp_path / "f.txt")
    assert (tmp_path / "f.txt").read_text().count("\n") == 2
