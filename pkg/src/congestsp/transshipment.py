"""Uncapacitated min-cost flow routed on an approximate shortest-path tree.

Demands are signed fixed-point integers, positive for supply. The tree is
rooted at vertex 0 and every vertex ``v`` pushes ``F(v)``, the total demand of
its subtree, to its parent; on a tree this is the only flow meeting the
demands, hence the cheapest one supported there.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import cluster
from .graph import SCALE, WeightedGraph, format_units
from .oracle import conservation_violations
from .partwise import PartwiseEngine
from .sssp import AlgorithmConstants, expected_sp_forest


class NonSpanningForest(RuntimeError):
    """The forest never became a spanning tree within the retry budget."""


@dataclass
class TreeFlow:
    tree: frozenset[int]
    parent: list[int]  # -1 at the root
    F: list[int]  # flow pushed from v to parent[v], fixed point
    cost_units: int  # sum |F(v)| * w(v, parent), product of fixed-point values
    rounds: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def cost(self) -> float:
        """Cost in (unit length) x (unit demand)."""
        return self.cost_units / (SCALE * SCALE)

    def edge_flow(self, g: WeightedGraph) -> dict[int, int]:
        """Signed flow per edge, positive from the smaller endpoint."""
        out = {}
        for v, p in enumerate(self.parent):
            if p < 0:
                continue
            e = g.eid(v, p)
            out[e] = self.F[v] if v < p else -self.F[v]
        return out


def _check_demands(g: WeightedGraph, demands: Sequence[int]) -> list[int]:
    demands = [int(d) for d in demands]
    if len(demands) != g.n:
        raise ValueError(f"need {g.n} demands, got {len(demands)}")
    if sum(demands) != 0:
        raise ValueError(f"demands sum to {sum(demands)} units, not zero")
    return demands


def route_on_tree(
    g: WeightedGraph,
    tree_edges,
    demands: Sequence[int],
    rng: np.random.Generator | None = None,
    *,
    root: int = 0,
    engine: PartwiseEngine | None = None,
) -> TreeFlow:
    """Subtree demand sums via the Heads/Tails hierarchy, pushed child to parent."""
    demands = _check_demands(g, demands)
    if rng is None:
        rng = np.random.default_rng()
    t = cluster.RootedTree.from_edges(g, tree_edges, roots=[root])
    if len(t.roots) != 1:
        raise NonSpanningForest(f"tree has {len(t.roots)} components")
    h = cluster.heads_tails(g, t, rng, engine=engine)
    F = cluster.aggregate_subtree(g, h, demands, "sum", engine=engine)
    parent = [int(p) for p in t.parent]
    cost = 0
    for v, p in enumerate(parent):
        if p >= 0:
            F[v] = int(F[v])
            cost += abs(F[v]) * g.edges[g.eid(v, p)][2]
    F[root] = 0
    return TreeFlow(frozenset(t.edges), parent, [int(x) for x in F], cost)


def expected_ts(
    g: WeightedGraph,
    demands: Sequence[int],
    beta: float,
    constants: AlgorithmConstants = AlgorithmConstants(),
    rng: np.random.Generator | None = None,
    *,
    engine: PartwiseEngine | None = None,
    retries: int = 8,
) -> TreeFlow:
    """Route the demands on one forest, drawing a fresh forest while it fails to span."""
    demands = _check_demands(g, demands)
    if rng is None:
        rng = np.random.default_rng()
    start = engine.rounds if engine else 0.0
    for attempt in range(retries + 1):
        forest = expected_sp_forest(g, beta, constants, rng, engine=engine)
        if len(forest.tree) == g.n - 1:
            flow = route_on_tree(g, forest.tree, demands, rng, engine=engine)
            flow.rounds = (engine.rounds - start) if engine else 0.0
            flow.extra["forest_attempts"] = attempt + 1
            return flow
    raise NonSpanningForest(f"no spanning forest in {retries + 1} attempts (last had {len(forest.tree)} edges, need {g.n - 1})")


def boosted_ts(
    g: WeightedGraph,
    demands: Sequence[int],
    beta: float,
    constants: AlgorithmConstants = AlgorithmConstants(),
    rng: np.random.Generator | None = None,
    *,
    engine: PartwiseEngine | None = None,
    repetitions: int | None = None,
) -> TreeFlow:
    """Cheapest of ``ceil(gamma log2 n)`` independent tree routings."""
    if rng is None:
        rng = np.random.default_rng()
    reps = constants.repetitions(g.n) if repetitions is None else repetitions
    runs = [expected_ts(g, demands, beta, constants, rng, engine=engine) for _ in range(reps)]
    best = min(runs, key=lambda f: f.cost_units)
    best.extra["run_costs"] = [f.cost_units for f in runs]
    best.rounds = sum(f.rounds for f in runs)
    return best


@dataclass(frozen=True)
class FlowVerdict:
    ok: bool
    violations: tuple[int, ...]  # vertices where conservation fails
    off_tree: tuple[int, ...]  # edges carrying flow outside the tree
    detail: str = ""


def tree_flow_optimality_check(g: WeightedGraph, tree_edges, demands: Sequence[int], flow: dict[int, int]) -> FlowVerdict:
    """Conservation plus support on the tree; together they force the unique, hence cheapest, tree flow."""
    tree_edges = frozenset(tree_edges)
    off = tuple(sorted(e for e, f in flow.items() if f and e not in tree_edges))
    bad = tuple(conservation_violations(g, demands, flow))
    detail = ""
    if bad:
        detail = f"conservation fails at vertex {bad[0]}"
    elif off:
        detail = f"edge {off[0]} carries flow outside the tree"
    return FlowVerdict(not bad and not off, bad, off, detail)


def format_flow(g: WeightedGraph, flow: TreeFlow) -> str:
    """``child parent F`` per tree edge, positive from child to parent."""
    return "".join(f"{v} {p} {format_units(flow.F[v])}\n" for v, p in enumerate(flow.parent) if p >= 0)


def store_flow(g: WeightedGraph, flow: TreeFlow, path) -> None:
    Path(path).write_text(format_flow(g, flow))
