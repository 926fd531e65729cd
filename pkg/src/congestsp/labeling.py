"""Approximate distance labels from the clusters of repeated forest runs.

Every cluster (zero-length component) formed at any level of any run gets a
64-bit id; its members record ``(id, R)`` where ``R`` is the scale at which
the cluster was formed. Any cluster has diameter at most its ``R``, so the
smallest ``R`` shared by two labels bounds their distance from above.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .graph import SCALE, GraphError, WeightedGraph, format_units, to_units
from .sssp import AlgorithmConstants, expected_sp_forest

INFINITE = math.inf
LABEL_KAPPA = 1.0  # labels must stay within LABEL_KAPPA * log2(n)^4 entries
ID_BITS = 64


def cluster_id(t_index: int, rep: int, level: int, leader: int) -> int:
    data = f"{t_index}:{rep}:{level}:{leader}".encode()
    return int.from_bytes(hashlib.blake2b(data, digest_size=ID_BITS // 8).digest(), "big")


def scale_indices(beta: float, constants: AlgorithmConstants) -> range:
    """``t = 1 .. ceil(ln(c1 / c2) + ln(1 / beta))``; run ``t`` starts from scale ``2^-t``."""
    top = math.ceil(math.log(constants.c1 / constants.c2) + math.log(1 / beta))
    return range(1, max(1, top) + 1)


@dataclass
class DistanceLabel:
    vertex: int
    entries: dict[int, int]  # cluster id -> R (fixed point)

    def __len__(self) -> int:
        return len(self.entries)

    def bits(self) -> int:
        return sum(ID_BITS + max(1, r.bit_length()) for r in self.entries.values())


@dataclass(frozen=True)
class LabelQueryResult:
    estimate: float  # R_min in unit lengths, an upper bound on the distance
    cluster: int | None
    R: int | None  # fixed point

    def calibrated(self, alpha: float) -> float:
        """Estimate scaled into the ``d~ <= d <= alpha d~`` convention."""
        return self.estimate / alpha


def build_labels(
    g: WeightedGraph,
    beta: float,
    constants: AlgorithmConstants = AlgorithmConstants(),
    rng: np.random.Generator | None = None,
    repetitions: int | None = None,
) -> list[DistanceLabel]:
    if rng is None:
        rng = np.random.default_rng()
    reps = constants.repetitions(g.n) if repetitions is None else repetitions
    labels = [DistanceLabel(v, {}) for v in range(g.n)]
    for t in scale_indices(beta, constants):
        R0 = max(1, SCALE >> t)
        for rep in range(reps):
            forest = expected_sp_forest(g, beta, constants, rng, R0=R0)
            for v in range(g.n):
                labels[v].entries[cluster_id(t, rep, 0, v)] = R0
            for level, rec in enumerate(forest.levels, 1):
                comp = rec.state.components(g)
                for v, leader in enumerate(comp):
                    labels[v].entries[cluster_id(t, rep, level, leader)] = rec.state.R
    return labels


def label_budget(n: int, beta: float, constants: AlgorithmConstants) -> int:
    """Worst-case entries per label: runs times (levels + 1)."""
    runs = len(scale_indices(beta, constants)) * constants.repetitions(n)
    smallest = SCALE >> max(scale_indices(beta, constants))
    levels = math.ceil(math.log(constants.target(n) / max(smallest, 1)) / math.log(constants.growth(n, beta))) + 1
    return runs * (levels + 1)


def polylog_entry_cap(n: int, kappa: float = LABEL_KAPPA) -> float:
    return kappa * math.log2(max(n, 2)) ** 4


def query(a: DistanceLabel, b: DistanceLabel) -> LabelQueryResult:
    """Smallest scale of a cluster both labels belong to; sees nothing but the labels."""
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    best: tuple[int, int] | None = None
    for cid, r in small.entries.items():
        if cid in large.entries and (best is None or (r, cid) < best):
            best = (r, cid)
    if best is None:
        return LabelQueryResult(INFINITE, None, None)
    return LabelQueryResult(best[0] / SCALE, best[1], best[0])


def format_label(label: DistanceLabel) -> str:
    items = sorted(label.entries.items())
    body = " ".join(f"{cid} {format_units(r)}" for cid, r in items)
    return f"{label.vertex} {len(items)}" + (f" {body}" if body else "")


def parse_label(line: str) -> DistanceLabel:
    tok = line.split()
    if len(tok) < 2:
        raise GraphError(f"malformed label line {line!r}")
    v, k = int(tok[0]), int(tok[1])
    if len(tok) != 2 + 2 * k:
        raise GraphError(f"label of vertex {v} announces {k} entries but has {(len(tok) - 2) / 2}")
    entries = {int(tok[2 + 2 * i]): to_units(tok[3 + 2 * i]) for i in range(k)}
    return DistanceLabel(v, entries)


def store_labels(labels: Sequence[DistanceLabel], path) -> None:
    Path(path).write_text("".join(format_label(lab) + "\n" for lab in labels))


def load_labels(path) -> dict[int, DistanceLabel]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.strip() and not line.startswith("#"):
            lab = parse_label(line)
            out[lab.vertex] = lab
    return out
