"""Approximate shortest-path forests by repeated LDD on a contracted, reweighted graph.

One level takes ``(w, T, R)`` where every zero-length component of ``w`` is
already spanned by ``T``, decomposes the contracted graph with lengths scaled
by ``1 / R``, adds the BFS edges to ``T``, zeroes edges inside the new
components and lengthens every cut edge by ``R' = (c1 / beta) ln n * R``.
Repeating with ``R <- R'`` until ``R >= n^c`` yields the forest; distances from
a source are read off with the tree aggregates, and the minimum over
``ceil(gamma log2 n)`` forests gives the shortest-path tree.

All lengths are fixed-point integers (``SCALE`` units per unit length).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from . import cluster
from .graph import SCALE, UNREACHABLE, DisjointSet, WeightedGraph, format_units, subgraph_dijkstra
from .ldd import DecompositionParams, FlaggedTrial, contract, decompose_contracted
from .partwise import PartwiseEngine


@dataclass(frozen=True)
class AlgorithmConstants:
    c1: float = 4.0  # growth of R per level, in units of ln n / beta
    c2: float = 2.0  # expected per-level stretch, in units of ln n
    c: float = 4.0  # stop once R >= n^c
    gamma: float = 2.0  # ceil(gamma * log2 n) repetitions
    ldd_c: float = 4.0  # start-time constant of the decomposition

    def __post_init__(self):
        if min(self.c1, self.c2, self.c, self.gamma, self.ldd_c) <= 0:
            raise ValueError("all constants must be positive")
        if not self.c1 >= self.c2 >= 1:
            raise ValueError(f"need c1 >= c2 >= 1, got c1={self.c1}, c2={self.c2}")

    @classmethod
    def parse(cls, text: str) -> "AlgorithmConstants":
        """``"c1,c2,c,gamma"`` as on the command line."""
        parts = [float(x) for x in text.split(",")]
        if len(parts) != 4:
            raise ValueError(f"expected four comma-separated constants c1,c2,c,gamma, got {text!r}")
        return cls(*parts)

    def repetitions(self, n: int) -> int:
        return max(1, math.ceil(self.gamma * math.log2(max(n, 2))))

    def growth(self, n: int, beta: float) -> float:
        return self.c1 / beta * math.log(max(n, 2))

    def target(self, n: int) -> int:
        """``n^c`` in fixed point."""
        return math.ceil(max(n, 2) ** self.c * SCALE)


def stretch_exponent(M: float, beta: float, constants: AlgorithmConstants) -> int:
    """``t(M)``: the first level whose scale is guaranteed to swallow a pair at distance ``M``."""
    if M <= 0:
        return 0
    return max(0, math.ceil(math.log(2 * M) / (math.log(constants.c1 / constants.c2) + math.log(1 / beta))))


def stretch_bound(M: float, n: int, beta: float, constants: AlgorithmConstants) -> float:
    """``(c1 ln n / beta)^t(M)``, an absolute bound on tree distance (unit lengths)."""
    return constants.growth(n, beta) ** stretch_exponent(M, beta, constants)


@dataclass
class SubroutineState:
    w: tuple[int, ...]  # per edge, fixed point
    tree: frozenset[int]
    R: int

    @classmethod
    def initial(cls, g: WeightedGraph, R0: int = SCALE) -> "SubroutineState":
        return cls(tuple(int(x) for x in g.weights.tolist()), frozenset(), int(R0))

    def components(self, g: WeightedGraph) -> list[int]:
        ds = DisjointSet(g.n)
        for e, (u, v, _) in enumerate(g.edges):
            if self.w[e] == 0:
                ds.union(u, v)
        return ds.labels()


class InvariantViolation(ValueError):
    def __init__(self, clause: int, detail: str):
        super().__init__(f"clause {clause}: {detail}")
        self.clause = clause


def _pair_distances(n: int, edges: list[tuple[int, int, int]]) -> np.ndarray:
    if not edges:
        d = np.full((n, n), np.inf)
        np.fill_diagonal(d, 0)
        return d
    rows = [u for u, _, _ in edges]
    cols = [v for _, v, _ in edges]
    data = [w for *_, w in edges]
    return shortest_path(csr_matrix((data, (rows, cols)), shape=(n, n)), directed=False)


def check_invariant(g: WeightedGraph, state: SubroutineState) -> list[InvariantViolation]:
    """Evaluate the five clauses linking ``(w, T)`` to the scale ``R``."""
    out: list[InvariantViolation] = []
    comp = np.array(state.components(g))
    R = state.R
    inside = [(u, v, w) for u, v, w in g.edges if comp[u] == comp[v]]
    for e, (u, v, _) in enumerate(g.edges):
        if comp[u] == comp[v] and state.w[e] != 0:
            out.append(InvariantViolation(2, f"edge {e} inside component {comp[u]} has length {state.w[e]}"))
        if comp[u] != comp[v] and state.w[e] < R:
            out.append(InvariantViolation(3, f"edge {e} between components has length {state.w[e]} < R={R}"))
    same = comp[:, None] == comp[None, :]
    # lengths are scaled to float for scipy; comparison uses a one-unit tolerance for rounding
    scale = float(SCALE)
    dg = _pair_distances(g.n, [(u, v, w / scale) for u, v, w in inside])
    worst = float(np.max(np.where(same, dg, 0))) if g.n else 0.0
    if worst * scale > R + 1:
        out.append(InvariantViolation(1, f"component diameter {worst:.6g} exceeds R={R / scale:.6g}"))
    tedges = [g.edges[e] for e in sorted(state.tree)]
    for e in sorted(state.tree):
        u, v, _ = g.edges[e]
        if comp[u] != comp[v]:
            out.append(InvariantViolation(5, f"tree edge {e} joins two components"))
    dt = _pair_distances(g.n, [(u, v, w / scale) for u, v, w in tedges])
    if np.isinf(np.where(same, dt, 0)).any():
        out.append(InvariantViolation(5, "tree does not span some component"))
    finite = np.where(same & np.isfinite(dt), dt, 0)
    worst_t = float(finite.max()) if g.n else 0.0
    if worst_t * scale > R + 1:
        out.append(InvariantViolation(4, f"tree distance {worst_t:.6g} inside a component exceeds R={R / scale:.6g}"))
    return out


@dataclass
class LevelRecord:
    state: SubroutineState  # output of the level
    R_in: int
    components: int
    rounds: float
    flagged_retries: int
    ldd_rounds: int


def ldd_subroutine(
    g: WeightedGraph,
    state: SubroutineState,
    beta: float,
    constants: AlgorithmConstants,
    rng: np.random.Generator,
    *,
    engine: PartwiseEngine | None = None,
    validate: bool = False,
    flag_budget: int = 16,
) -> tuple[SubroutineState, LevelRecord]:
    """One level: decompose the contraction of ``(G, w)`` at scale ``R`` and reweight."""
    if validate:
        bad = check_invariant(g, state)
        if bad:
            raise bad[0]
    R = state.R
    cg = contract(g, state.w)
    params = DecompositionParams(beta, constants.ldd_c, scale=R)
    # every LDD round: one direct step, then a part-wise min with its broadcast
    round_cost = 0.0
    if engine is not None and engine.fidelity != "free":
        per_reduce = engine.cost(cg.partition())
        round_cost = 1 + (per_reduce if engine.fidelity == "message" else 2 * per_reduce)
    for attempt in range(flag_budget + 1):
        res = decompose_contracted(cg, params, None, rng, round_cost=round_cost)
        if not res.flagged:
            break
    else:
        raise FlaggedTrial(f"{flag_budget + 1} consecutive decompositions had negative start times")
    if engine is not None:
        engine.rounds += res.rounds

    R_next = math.ceil(constants.growth(g.n, beta) * R)
    tree = set(state.tree)
    tree.update(int(e) for e in res.part_parent if e >= 0)
    w = list(state.w)
    proot = res.part_root
    for a, b, wt, e in cg.inter:
        if proot[a] == proot[b]:
            w[e] = 0
        else:
            w[e] = wt + R_next
    out = SubroutineState(tuple(w), frozenset(tree), R_next)
    rec = LevelRecord(out, R, len(set(proot.tolist())), res.rounds, attempt, -(-res.starts.base // SCALE))
    return out, rec


@dataclass
class ForestResult:
    tree: frozenset[int]
    levels: list[LevelRecord]
    R0: int
    rounds: float = 0.0

    @property
    def final(self) -> SubroutineState:
        return self.levels[-1].state


def expected_sp_forest(
    g: WeightedGraph,
    beta: float,
    constants: AlgorithmConstants = AlgorithmConstants(),
    rng: np.random.Generator | None = None,
    *,
    R0: int = SCALE,
    engine: PartwiseEngine | None = None,
    validate: bool = False,
) -> ForestResult:
    """Iterate the level step from scale ``R0`` until ``R >= n^c``."""
    if R0 <= 0:
        raise ValueError("initial scale must be positive")
    if rng is None:
        rng = np.random.default_rng()
    DecompositionParams(beta).check_size(g.n)
    state = SubroutineState.initial(g, R0)
    target = constants.target(g.n)
    levels: list[LevelRecord] = []
    start = engine.rounds if engine else 0.0
    while state.R < target:
        state, rec = ldd_subroutine(g, state, beta, constants, rng, engine=engine, validate=validate)
        levels.append(rec)
    if validate and levels:
        bad = check_invariant(g, state)
        if bad:
            raise bad[0]
    if not levels:
        levels.append(LevelRecord(state, state.R, len(set(state.components(g))), 0.0, 0, 0))
    return ForestResult(state.tree, levels, R0, (engine.rounds - start) if engine else 0.0)


@dataclass
class SsspResult:
    source: int
    dist: list[int]  # fixed point; UNREACHABLE for infinity
    parent: list[int]  # -1 at the source and unreached vertices
    tree: frozenset[int]
    rounds: float = 0.0
    repetitions: int = 1
    extra: dict = field(default_factory=dict)

    def finite(self, v: int) -> bool:
        return self.dist[v] < UNREACHABLE


def expected_sp_distance(
    g: WeightedGraph,
    beta: float,
    s: int,
    constants: AlgorithmConstants = AlgorithmConstants(),
    rng: np.random.Generator | None = None,
    *,
    engine: PartwiseEngine | None = None,
    forest: ForestResult | None = None,
    validate: bool = False,
) -> SsspResult:
    """Distances from ``s`` inside one forest, extracted with path-to-root aggregates."""
    if rng is None:
        rng = np.random.default_rng()
    start = engine.rounds if engine else 0.0
    if forest is None:
        forest = expected_sp_forest(g, beta, constants, rng, engine=engine, validate=validate)
    # component of s in the forest
    ds = DisjointSet(g.n)
    for e in forest.tree:
        u, v, _ = g.edges[e]
        ds.union(u, v)
    root = ds.find(s)
    comp_edges = [e for e in forest.tree if ds.find(g.edges[e][0]) == root]
    t = cluster.RootedTree.from_edges(g, comp_edges, roots=[s])
    h = cluster.heads_tails(g, t, rng, engine=engine)
    in_comp = [ds.find(v) == root for v in range(g.n)]
    depth = cluster.aggregate_path_to_root(g, h, [1 if in_comp[v] else 0 for v in range(g.n)], engine=engine)
    # each vertex picks the tree neighbor one level closer to s
    parent = [-1] * g.n
    x = [0] * g.n
    for e in comp_edges:
        u, v, w = g.edges[e]
        for a, b in ((u, v), (v, u)):
            if depth[b] == depth[a] - 1 and a != s:
                parent[a] = b
                x[a] = w
    if engine is not None:
        engine.direct(1)
    dist = cluster.aggregate_path_to_root(g, h, x, engine=engine)
    dist = [int(dist[v]) if in_comp[v] else UNREACHABLE for v in range(g.n)]
    return SsspResult(
        s, dist, parent, frozenset(comp_edges),
        rounds=(engine.rounds - start) if engine else 0.0,
        extra={"levels": len(forest.levels), "hierarchy_depth": h.depth},
    )


def sssp_tree(
    g: WeightedGraph,
    beta: float,
    s: int,
    constants: AlgorithmConstants = AlgorithmConstants(),
    rng: np.random.Generator | None = None,
    *,
    engine: PartwiseEngine | None = None,
    repetitions: int | None = None,
    max_extra: int | None = None,
    validate: bool = False,
) -> SsspResult:
    """Shortest-path tree from the minimum over independent forests.

    If some vertex is unreached by every forest, further forests are drawn
    (up to ``max_extra``, default three times the base count) before giving up.
    """
    if rng is None:
        rng = np.random.default_rng()
    reps = constants.repetitions(g.n) if repetitions is None else repetitions
    if max_extra is None:
        max_extra = 3 * reps
    start = engine.rounds if engine else 0.0
    d_min = [UNREACHABLE] * g.n
    history: list[list[int]] = []
    used = 0
    while used < reps or (UNREACHABLE in d_min and used < reps + max_extra):
        res = expected_sp_distance(g, beta, s, constants, rng, engine=engine, validate=validate)
        d_min = [min(a, b) for a, b in zip(d_min, res.dist)]
        history.append(list(d_min))
        used += 1
    if UNREACHABLE in d_min:
        missing = [v for v in range(g.n) if d_min[v] >= UNREACHABLE]
        raise RuntimeError(f"{len(missing)} vertices unreached after {used} forests (first: {missing[:5]})")
    parent = [-1] * g.n
    tree = set()
    for v in range(g.n):
        if v == s:
            continue
        for u, e in g.adjacency[v]:  # sorted by neighbor id
            if d_min[u] + g.edges[e][2] <= d_min[v]:
                parent[v] = u
                tree.add(e)
                break
        else:
            raise AssertionError(f"vertex {v} has no neighbor satisfying the relaxation condition")
    if engine is not None:
        engine.direct(1)
    dist = tree_distances(g, tree, s)
    return SsspResult(
        s, dist, parent, frozenset(tree),
        rounds=(engine.rounds - start) if engine else 0.0,
        repetitions=used,
        extra={"d_min": d_min, "history": history},
    )


def tree_distances(g: WeightedGraph, tree_edges, s: int) -> list[int]:
    """Distances from ``s`` along ``tree_edges`` (original lengths)."""
    d = subgraph_dijkstra(g.n, [g.edges[e] for e in sorted(tree_edges)], s)
    return [int(x) if x < UNREACHABLE else UNREACHABLE for x in d.tolist()]


def format_sssp(res: SsspResult) -> str:
    out = []
    for v in range(len(res.dist)):
        d = "inf" if res.dist[v] >= UNREACHABLE else format_units(res.dist[v])
        out.append(f"{v} {d} {res.parent[v]}\n")
    return "".join(out)


def format_trace(forest: ForestResult) -> str:
    """Per level: index, input scale, output scale, component count, tree size."""
    lines = ["level R_in R_out components tree_edges\n"]
    for i, rec in enumerate(forest.levels, 1):
        lines.append(f"{i} {rec.R_in} {rec.state.R} {rec.components} {len(rec.state.tree)}\n")
    return "".join(lines)


def store_sssp(res: SsspResult, path) -> None:
    Path(path).write_text(format_sssp(res))
