import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from congestsp import kernels, ldd
from congestsp.graph import SCALE, WeightedGraph, dijkstra, to_units
from congestsp.ldd import DecompositionParams
from congestsp.partwise import trivial_shortcut

from conftest import connected_graphs, make, random_connected

# sample graph with fractional lengths; vertices listed by their starting times
FIG_EDGES = [(0, 1, "0.1"), (1, 2, "0.9"), (3, 4, 1), (4, 5, 4), (2, 3, 1), (1, 4, "1.1"), (0, 4, "0.9")]
FIG_STARTS = (1, 1, 4, 2, 0, 2)


def figure_graph():
    g = WeightedGraph.from_lengths(6, [(u, v, 1) for u, v, _ in FIG_EDGES])
    lengths = {(min(u, v), max(u, v)): to_units(w) for u, v, w in FIG_EDGES}
    return g, np.array([lengths[u, v] for u, v, _ in g.edges], dtype=np.int64)


@pytest.mark.parametrize("backend", [
    "python",
    pytest.param("cython", marks=pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled kernels not built")),
])
def test_sample_figure(backend):
    g, w = figure_graph()
    res = ldd.decompose(g, DecompositionParams(0.5), start=[s * SCALE for s in FIG_STARTS], weights=w, backend=backend)
    # the vertex starting at 0 takes the times-1/2/0 trio, the other 1 keeps the 4, the lone 2 stays alone
    assert res.root.tolist() == [4, 1, 1, 4, 4, 5]
    assert res.arrival[2] == to_units("1.9")
    assert res.parent_edge[4] == -1 and res.parent_edge[3] == g.eid(3, 4)


def test_params_validation():
    for beta in (0.0, 1.0, -0.5):
        with pytest.raises(ValueError):
            DecompositionParams(beta)
    with pytest.raises(ValueError):
        DecompositionParams(0.01).check_size(50)


def test_horizon_formula():
    assert ldd.horizon(256, DecompositionParams(0.1)) == round(40 * math.log(256) * SCALE)


def test_near_one_beta_starts_together(rng):
    st_ = ldd.sample_start_times(1000, DecompositionParams(0.999), rng)
    assert (st_.delta == 0).mean() > 0.99
    g = make("grid:6")
    res = ldd.decompose(g, DecompositionParams(0.999), rng)
    assert not res.flagged
    # simultaneous starts: every vertex keeps itself unless a smaller id with delta=1 arrives first
    for v, r in enumerate(res.root.tolist()):
        assert res.arrival[v] >= res.starts.start[r]


def test_geometric_mean():
    beta = 0.2
    d = ldd.sample_start_times(100_000, DecompositionParams(beta), np.random.default_rng(0)).delta
    mean, sd = (1 - beta) / beta, math.sqrt(1 - beta) / beta
    assert abs(d.mean() - mean) <= 3 * sd / math.sqrt(len(d))


def test_memoryless_shift():
    d = ldd.sample_start_times(60_000, DecompositionParams(0.3), np.random.default_rng(1)).delta
    tail = d[d >= 5] - 5
    assert stats.ks_2samp(tail, d[:20_000]).pvalue > 0.001


def test_flagged_when_delta_exceeds_horizon():
    g = make("line:3")
    res = ldd.decompose(g, DecompositionParams(0.5), start=[-SCALE, 0, 0])
    assert res.flagged


@given(connected_graphs(max_n=30), st.integers(0, 2**31), st.sampled_from([0.1, 0.3, 0.7]))
def test_decomposition_properties(g, seed, beta):
    params = DecompositionParams(max(beta, 1 / g.n) if g.n > 1 else beta)
    res = ldd.decompose(g, params, np.random.default_rng(seed))
    start = res.starts.start
    roots = res.root.tolist()
    for v, r in enumerate(roots):
        assert roots[r] == r  # roots own themselves
        assert res.arrival[v] <= start[v]  # nobody waits past its own start
        assert res.arrival[v] - start[r] >= dijkstra(g, r)[v]  # waves move at unit speed
        e = res.parent_edge[v]
        if e >= 0:
            u = g.edges[e][0] + g.edges[e][1] - v
            assert roots[u] == r
            assert res.arrival[v] == res.arrival[u] + g.edges[e][2]
        else:
            assert r == v
    assert len(res.tree_edges) == g.n - len(res.components())


def test_message_matches_event():
    for s in range(8):
        g = make("er:40:0.15", weights="int:1:20", seed=s)
        params = DecompositionParams(0.2)
        a = ldd.decompose(g, params, np.random.default_rng(s))
        b = ldd.decompose_message(g, params, np.random.default_rng(s))
        assert np.array_equal(a.root, b.root)
        assert np.array_equal(a.arrival, b.arrival)
        assert np.array_equal(a.parent_edge, b.parent_edge)
        assert not b.stats.violations
        # in-flight waves may still be crossing an edge after the deadline
        assert b.rounds <= a.rounds + max(w for *_, w in g.edges) // SCALE


def test_message_needs_unit_lengths():
    g = make("line:3")
    with pytest.raises(ValueError):
        ldd.decompose_message(g, DecompositionParams(0.5, scale=2 * SCALE), np.random.default_rng(0))


def test_contracted_identity_on_singletons():
    g = make("er:50:0.1", weights="int:1:9", seed=3)
    cg = ldd.contract(g, g.weights)
    assert cg.k == g.n
    params = DecompositionParams(0.25)
    a = ldd.decompose(g, params, np.random.default_rng(9))
    b = ldd.decompose_contracted(cg, params, None, np.random.default_rng(9))
    assert np.array_equal(a.root, b.root)
    assert np.array_equal(a.arrival, b.arrival)
    assert np.array_equal(a.parent_edge, b.part_parent)


@pytest.mark.parametrize("ta,tb", [(0, 1), (0, 2), (1, 0), (3, 3), (5, 2), (4, 3)])
def test_two_parts_one_edge(ta, tb):
    # parts {0,1} and {2,3} joined by edge (1,2) of length R
    g = make("line:4")
    R = 3 * SCALE
    cg = ldd.contract(g, [0, R, 0])
    params = DecompositionParams(0.5, scale=R)
    start = [ta * SCALE, tb * SCALE]
    res = ldd.decompose_contracted(cg, params, None, start=start)
    h = ldd.decompose_explicit(cg, params, start=start)
    early, late = sorted([(start[0], 0), (start[1], 1)])
    merged = (early[0] + SCALE, cg.leaders[early[1]]) < (late[0], cg.leaders[late[1]])
    assert (res.part_root[0] == res.part_root[1]) == merged
    assert [cg.leaders[r] for r in h.root] == res.part_root.tolist()


def test_contracted_matches_explicit():
    for s in range(12):
        rng = np.random.default_rng(s)
        g = random_connected(rng, int(rng.integers(10, 80)), 0.05)
        R = int(rng.integers(1, 4)) * SCALE
        w = [0 if rng.random() < 0.4 else max(int(x), R) for x in g.weights]
        cg = ldd.contract(g, w)
        cg.check(R)
        params = DecompositionParams(float(rng.uniform(0.1, 0.6)), scale=R)
        e = ldd.decompose_explicit(cg, params, np.random.default_rng(s))
        c = ldd.decompose_contracted(cg, params, None, np.random.default_rng(s))
        lead = np.array(cg.leaders)
        assert np.array_equal(lead[e.root][cg.part_of], c.root)
        assert np.array_equal(e.parent_edge, c.part_parent)


def test_contracted_round_charge():
    g = make("grid:6")
    cg = ldd.contract(g, g.weights)
    sc = trivial_shortcut(g, cg.partition())
    res = ldd.decompose_contracted(cg, DecompositionParams(0.3), sc, np.random.default_rng(0))
    cost = ldd.contracted_round_cost(cg, sc)
    assert res.rounds == math.ceil(ldd._ldd_rounds(res.starts) * cost)


def test_cut_rate_same_vertex_and_monotone():
    g = make("line:20")
    pairs = [(5, 5), (5, 6), (5, 7), (5, 9), (5, 13)]
    rates = ldd.cut_probability_harness(g, DecompositionParams(0.1), pairs, 600, np.random.default_rng(2))
    assert rates[0].rate == 1.0
    for a, b in zip(rates[1:], rates[2:]):
        assert a.ci_high >= b.ci_low  # non-increasing up to sampling noise
    for r in rates[1:]:
        assert r.separation <= 0.1 * (2 * r.distance + 1) + 3 * math.sqrt(max(r.separation * r.rate, 1e-9) / r.trials)


def test_radius_bound_small():
    g = make("er:128:0.05", seed=1)
    params = DecompositionParams(0.2)
    rng = np.random.default_rng(0)
    for _ in range(20):
        res = ldd.decompose(g, params, rng)
        if res.flagged:
            continue
        rad = res.tree_radius(lambda r: res.starts.start[r])
        assert max(rad.values()) <= ldd.horizon(g.n, params)


def test_store_decomposition(tmp_path):
    g = make("line:4")
    res = ldd.decompose(g, DecompositionParams(0.5), start=[0, 0, 0, 0])
    ldd.store_decomposition(res, tmp_path / "d.txt")
    lines = (tmp_path / "d.txt").read_text().splitlines()
    assert lines[0].split() == ["0", "0", "0"]
    assert len(lines) == 4
