import math

import numpy as np

from congestsp import labeling, oracle
from congestsp.graph import SCALE, WeightedGraph
from congestsp.sssp import AlgorithmConstants

from conftest import make

K = AlgorithmConstants()


def test_scale_indices():
    assert list(labeling.scale_indices(0.125, K)) == list(range(1, math.ceil(math.log(2) + math.log(8)) + 1))


def test_single_vertex_label():
    g = WeightedGraph(1, ())
    (lab,) = labeling.build_labels(g, 0.5, K, np.random.default_rng(0))
    res = labeling.query(lab, lab)
    assert res.R is not None and res.estimate <= 0.5


def test_two_vertices_share_a_cluster():
    g = WeightedGraph.from_lengths(2, [(0, 1, 5)])
    a, b = labeling.build_labels(g, 0.5, K, np.random.default_rng(1))
    res = labeling.query(a, b)
    assert res.estimate >= 5
    assert res.R == a.entries[res.cluster] == b.entries[res.cluster]


def test_self_query_is_small():
    g = make("er:32:0.15", seed=2)
    labels = labeling.build_labels(g, 0.25, K, np.random.default_rng(2))
    first = max(labeling.scale_indices(0.25, K))
    for lab in labels[:5]:
        assert labeling.query(lab, lab).R == SCALE >> first


def test_sound_symmetric_and_within_budget():
    g = make("er:48:0.1", weights="int:1:9", seed=3)
    beta = 0.25
    labels = labeling.build_labels(g, beta, K, np.random.default_rng(3))
    truth = oracle.apsp(g)
    for x in range(g.n):
        for y in range(x + 1, g.n):
            a, b = labeling.query(labels[x], labels[y]), labeling.query(labels[y], labels[x])
            assert a == b
            assert a.estimate * SCALE >= truth[x, y]
    assert max(len(lab) for lab in labels) <= labeling.label_budget(g.n, beta, K)


def test_no_shared_cluster_is_infinite():
    res = labeling.query(labeling.DistanceLabel(0, {1: SCALE}), labeling.DistanceLabel(1, {2: SCALE}))
    assert res.estimate == math.inf and res.cluster is None


def test_calibrated_estimate():
    res = labeling.LabelQueryResult(8.0, 1, 8 * SCALE)
    assert res.calibrated(4) == 2.0


def test_cluster_ids_distinct():
    ids = {labeling.cluster_id(t, r, lvl, v) for t in range(3) for r in range(4) for lvl in range(5) for v in range(20)}
    assert len(ids) == 3 * 4 * 5 * 20


def test_label_file_round_trip(tmp_path):
    g = make("line:6")
    labels = labeling.build_labels(g, 0.5, K, np.random.default_rng(4), repetitions=2)
    labeling.store_labels(labels, tmp_path / "labels.txt")
    back = labeling.load_labels(tmp_path / "labels.txt")
    assert [back[v].entries for v in range(g.n)] == [lab.entries for lab in labels]
    assert labeling.query(back[0], back[5]) == labeling.query(labels[0], labels[5])


def test_label_bits_polylog():
    g = make("er:64:0.1", seed=5)
    labels = labeling.build_labels(g, 0.25, K, np.random.default_rng(5))
    cap = labeling.polylog_entry_cap(g.n)
    assert max(len(lab) for lab in labels) <= cap
    # every entry is a fixed-width id plus an R below the final scale
    widest = labeling.ID_BITS + (K.target(g.n) * math.ceil(K.growth(g.n, 0.25))).bit_length()
    assert max(lab.bits() for lab in labels) <= cap * widest
