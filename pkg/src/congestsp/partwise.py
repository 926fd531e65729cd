"""Valid partitions, shortcut edge sets, shortcut quality and part-wise aggregation.

Part-wise aggregation runs as genuine node programs: inside every augmented
part ``G[S_i] + E_i`` the vertices run an echo wave with extinction (smallest
initiator id survives, so the leader is the minimum vertex of the part), the
echo convergecasts the aggregate to the leader and the result is broadcast
back down the echo tree. Edges used by several parts serve one queued message
per round, round-robin over part index.
"""
from __future__ import annotations

import math
import operator
from collections import deque
from dataclasses import dataclass
from functools import reduce
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from . import sim
from .graph import GraphError, WeightedGraph

# Rounds of partwise_aggregate stay within PARTWISE_ALPHA * (c + d) * ceil(log2 n).
PARTWISE_ALPHA = 4

OPERATORS: dict[str, Callable] = {
    "min": min,
    "max": max,
    "sum": operator.add,
    "or": operator.or_,
}


def combine(op: str, a, b):
    """Apply ``op`` with ``None`` acting as the identity."""
    if a is None:
        return b
    if b is None:
        return a
    return OPERATORS[op](a, b)


@dataclass(frozen=True)
class AggregateSpec:
    values: tuple
    op: str = "sum"

    def __post_init__(self):
        if self.op not in OPERATORS:
            raise ValueError(f"unsupported operator {self.op!r}; use one of {sorted(OPERATORS)}")
        object.__setattr__(self, "values", tuple(self.values))


@dataclass(frozen=True)
class ValidPartition:
    """Disjoint connected parts; ``part_of[v]`` is -1 for unassigned vertices.

    Parts are numbered in increasing order of their minimum vertex.
    """

    part_of: tuple[int, ...]

    @classmethod
    def from_labels(cls, labels: Sequence[int]) -> "ValidPartition":
        """Renumber arbitrary labels (negative = unassigned) by minimum member."""
        first: dict[int, int] = {}
        for v, lab in enumerate(labels):
            if lab is not None and lab >= 0 and lab not in first:
                first[lab] = v
        order = {lab: i for i, lab in enumerate(sorted(first, key=first.get))}
        return cls(tuple(order[lab] if lab is not None and lab >= 0 else -1 for lab in labels))

    @classmethod
    def from_parts(cls, n: int, parts: Sequence[Sequence[int]]) -> "ValidPartition":
        labels = [-1] * n
        for i, part in enumerate(parts):
            for v in part:
                if labels[v] != -1:
                    raise GraphError(f"vertex {v} appears in two parts")
                labels[v] = i
        return cls.from_labels(labels)

    @classmethod
    def singletons(cls, n: int) -> "ValidPartition":
        return cls(tuple(range(n)))

    @property
    def n(self) -> int:
        return len(self.part_of)

    @property
    def parts(self) -> list[list[int]]:
        k = max(self.part_of, default=-1) + 1
        out: list[list[int]] = [[] for _ in range(k)]
        for v, i in enumerate(self.part_of):
            if i >= 0:
                out[i].append(v)
        return out

    def validate(self, g: WeightedGraph) -> None:
        if self.n != g.n:
            raise GraphError(f"partition covers {self.n} vertices, graph has {g.n}")
        for i, part in enumerate(self.parts):
            if not part:
                raise GraphError(f"part {i} is empty")
            if not _connected(g, set(part)):
                raise GraphError(f"part {i} does not induce a connected subgraph")


def _connected(g: WeightedGraph, members: set[int]) -> bool:
    start = next(iter(members))
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for v, _ in g.adjacency[u]:
            if v in members and v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == len(members)


def load_partition(path, n: int) -> ValidPartition:
    labels = [None] * n
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 2:
            raise GraphError(f"line {lineno}: expected 'v part-id'")
        v, part = int(fields[0]), int(fields[1])
        if not 0 <= v < n or labels[v] is not None:
            raise GraphError(f"line {lineno}: bad or repeated vertex {v}")
        labels[v] = part
    if any(lab is None for lab in labels):
        raise GraphError("partition file must list every vertex")
    return ValidPartition.from_labels(labels)


def store_partition(p: ValidPartition, path) -> None:
    Path(path).write_text("".join(f"{v} {i}\n" for v, i in enumerate(p.part_of)))


@dataclass(frozen=True)
class Shortcut:
    """One shortcut edge set (edge indices) per part."""

    edge_sets: tuple[frozenset[int], ...]

    @classmethod
    def empty(cls, p: ValidPartition) -> "Shortcut":
        return cls(tuple(frozenset() for _ in p.parts))


def bfs_tree_edges(g: WeightedGraph, root: int = 0) -> frozenset[int]:
    parent_edge = [-1] * g.n
    seen = [False] * g.n
    seen[root] = True
    frontier = [root]
    while frontier:
        nxt = []
        for u in frontier:
            for v, e in g.adjacency[u]:
                if not seen[v]:
                    seen[v] = True
                    parent_edge[v] = e
                    nxt.append(v)
        frontier = nxt
    return frozenset(e for e in parent_edge if e >= 0)


def trivial_shortcut(g: WeightedGraph, p: ValidPartition) -> Shortcut:
    """Parts with at least sqrt(n) vertices get a global BFS tree; the rest get nothing."""
    tree = bfs_tree_edges(g, 0)
    threshold = math.sqrt(g.n)
    return Shortcut(tuple(tree if len(part) >= threshold else frozenset() for part in p.parts))


def augmented_edges(g: WeightedGraph, p: ValidPartition, sc: Shortcut, i: int) -> set[int]:
    """Edge indices of ``G[S_i] + E_i``."""
    out = set(sc.edge_sets[i])
    for e, (u, v, _) in enumerate(g.edges):
        if p.part_of[u] == i and p.part_of[v] == i:
            out.add(e)
    return out


def quality(g: WeightedGraph, p: ValidPartition, sc: Shortcut) -> tuple[int, float, float]:
    """``(congestion, dilation, congestion + dilation)``; dilation is ``inf`` for a disconnected part."""
    load = np.zeros(g.m, dtype=np.int64)
    for es in sc.edge_sets:
        for e in es:
            load[e] += 1
    congestion = int(load.max()) if g.m else 0
    dilation = 0.0
    intra = [[] for _ in p.parts]
    for e, (u, v, _) in enumerate(g.edges):
        if p.part_of[u] >= 0 and p.part_of[u] == p.part_of[v]:
            intra[p.part_of[u]].append(e)
    for i, part in enumerate(p.parts):
        edges = set(intra[i]) | set(sc.edge_sets[i])
        verts = set(part)
        for e in edges:
            verts.update(g.edges[e][:2])
        if len(verts) <= 1:
            continue
        index = {v: k for k, v in enumerate(sorted(verts))}
        rows = [index[g.edges[e][0]] for e in edges]
        cols = [index[g.edges[e][1]] for e in edges]
        adj = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(index), len(index)))
        dist = shortest_path(adj, directed=False, unweighted=True)
        dilation = max(dilation, float(dist.max()))
    return congestion, dilation, congestion + dilation


def round_bound(c: float, d: float, n: int, alpha: float = PARTWISE_ALPHA) -> float:
    return alpha * (c + d) * math.ceil(math.log2(max(n, 2)))


# ---------------------------------------------------------------------------
# message-faithful aggregation

WAVE, ECHO, RESULT = 0, 1, 2


class _PartState:
    __slots__ = ("wave", "parent", "pending", "acc", "children", "echoed", "result")

    def __init__(self):
        self.wave = None
        self.parent = None
        self.pending: set[int] = set()
        self.acc = None
        self.children: list[int] = []
        self.echoed = False
        self.result = None


class EchoAggregate(sim.NodeProgram):
    """Per-vertex program for one part-wise aggregation round trip.

    ``local`` maps part index to this vertex's neighbours in that augmented
    part; ``own_part`` is -1 for vertices outside every part.
    """

    def __init__(self, own_part: int, value, local: Mapping[int, list[int]], op: str):
        self.own_part = own_part
        self.value = value
        self.local = {i: sorted(nbrs) for i, nbrs in local.items()}
        self.op = op
        self.states = {i: _PartState() for i in self.local}
        self.queues: dict[int, dict[int, deque]] = {}
        self.last_part: dict[int, int] = {}
        self.result = value if own_part < 0 else None

    def _send(self, u, part, msg):
        self.queues.setdefault(u, {}).setdefault(part, deque()).append(msg)

    def _purge(self, part):
        for per_part in self.queues.values():
            q = per_part.get(part)
            if q:
                per_part[part] = deque(m for m in q if m[0] == RESULT)

    def _adopt(self, part, wave, parent):
        st = self.states[part]
        self._purge(part)
        st.wave = wave
        st.parent = parent
        st.pending = set(self.local[part]) - ({parent} if parent is not None else set())
        st.acc = self.value if part == self.own_part else None
        st.children = []
        st.echoed = False
        for u in sorted(st.pending):
            self._send(u, part, (WAVE, part, wave))
        self._check(part)

    def _check(self, part):
        st = self.states[part]
        if st.pending or st.echoed:
            return
        st.echoed = True
        if st.parent is None:
            self._finish(part, st.acc)
        else:
            self._send(st.parent, part, (ECHO, part, st.wave, st.acc))

    def _finish(self, part, value):
        st = self.states[part]
        st.result = value
        if part == self.own_part:
            self.result = value
        for u in st.children:
            self._send(u, part, (RESULT, part, value))

    def step(self, rnd, inbox):
        me = self.ctx.vertex
        if rnd == 0 and self.own_part >= 0:
            self._adopt(self.own_part, me, None)
        for u in sorted(inbox):
            msg = inbox[u]
            kind, part = msg[0], msg[1]
            st = self.states[part]
            if kind == WAVE:
                wave = msg[2]
                if st.wave is None or wave < st.wave:
                    self._adopt(part, wave, u)
                elif wave == st.wave:
                    st.pending.discard(u)
                    self._check(part)
            elif kind == ECHO:
                if msg[2] == st.wave:
                    st.acc = combine(self.op, st.acc, msg[3])
                    st.children.append(u)
                    st.pending.discard(u)
                    self._check(part)
            else:
                self._finish(part, msg[2])
        out = {}
        for u, per_part in self.queues.items():
            ready = sorted(i for i, q in per_part.items() if q)
            if not ready:
                continue
            last = self.last_part.get(u, -1)
            pick = next((i for i in ready if i > last), ready[0])
            out[u] = per_part[pick].popleft()
            self.last_part[u] = pick
        busy = any(q for per_part in self.queues.values() for q in per_part.values())
        return out, not busy


def _local_views(g: WeightedGraph, p: ValidPartition, sc: Shortcut) -> list[dict[int, set[int]]]:
    views: list[dict[int, set[int]]] = [dict() for _ in range(g.n)]
    for i in range(len(p.parts)):
        for e in augmented_edges(g, p, sc, i):
            u, v, _ = g.edges[e]
            views[u].setdefault(i, set()).add(v)
            views[v].setdefault(i, set()).add(u)
    for v, i in enumerate(p.part_of):
        if i >= 0:
            views[v].setdefault(i, set())
    return views


@dataclass
class PartwiseResult:
    values: list
    stats: sim.RunStats
    fidelity: str = "message"


def partwise_aggregate(
    g: WeightedGraph,
    p: ValidPartition,
    sc: Shortcut,
    spec: AggregateSpec,
    max_rounds: int | None = None,
    kappa: float = sim.DEFAULT_KAPPA,
) -> PartwiseResult:
    """Every vertex of part ``S_i`` learns the aggregate of ``x_v`` over ``S_i``; unassigned vertices keep ``x_v``."""
    if len(spec.values) != g.n:
        raise ValueError("need one value per vertex")
    views = _local_views(g, p, sc)
    programs = [EchoAggregate(p.part_of[v], spec.values[v], views[v], spec.op) for v in range(g.n)]
    if max_rounds is None:
        max_rounds = 50 * (g.n + g.m) + 100
    programs, stats = sim.run(g, programs, max_rounds=max_rounds, kappa=kappa)
    if stats.timed_out:
        raise TimeoutError(f"part-wise aggregation exceeded {max_rounds} rounds ({sim.measure(stats)})")
    return PartwiseResult([prog.result for prog in programs], stats)


def partwise_broadcast(
    g: WeightedGraph,
    p: ValidPartition,
    sc: Shortcut,
    messages: Mapping[int, object],
    holders: Mapping[int, int] | None = None,
    **kwargs,
) -> PartwiseResult:
    """Deliver ``messages[i]`` from its holder (default: part leader) to all of ``S_i``."""
    parts = p.parts
    values: list = [None] * g.n
    for i, msg in messages.items():
        holder = holders[i] if holders and i in holders else min(parts[i])
        if p.part_of[holder] != i:
            raise ValueError(f"holder {holder} is not in part {i}")
        values[holder] = msg
    res = partwise_aggregate(g, p, sc, AggregateSpec(tuple(values), "min"), **kwargs)
    res.values = [res.values[v] if p.part_of[v] >= 0 else None for v in range(g.n)]
    return res


def direct_reduce_parts(p: ValidPartition, spec: AggregateSpec) -> list:
    """Per-part reduction computed centrally."""
    return [reduce(lambda a, b: combine(spec.op, a, b), (spec.values[v] for v in part), None) for part in p.parts]


# ---------------------------------------------------------------------------
# execution engines shared by the higher-level algorithms

ShortcutProvider = Callable[[WeightedGraph, ValidPartition], Shortcut]
FIDELITIES = ("free", "accounted", "message")


class PartwiseEngine:
    """Performs part-wise reductions for an algorithm and tallies CONGEST rounds.

    ``free`` reduces centrally and charges nothing, ``accounted`` reduces
    centrally and charges ``round_bound`` of the measured shortcut quality,
    ``message`` runs :func:`partwise_aggregate` and charges the simulated rounds.
    """

    def __init__(
        self,
        g: WeightedGraph,
        fidelity: str = "accounted",
        shortcuts: ShortcutProvider = trivial_shortcut,
        alpha: float = PARTWISE_ALPHA,
        kappa: float = sim.DEFAULT_KAPPA,
    ):
        if fidelity not in FIDELITIES:
            raise ValueError(f"fidelity must be one of {FIDELITIES}, got {fidelity!r}")
        self.g = g
        self.fidelity = fidelity
        self.shortcuts = shortcuts
        self.alpha = alpha
        self.kappa = kappa
        self.rounds = 0.0
        self.operations = 0
        self.violations = 0
        self.max_quality = 0.0
        self.op_log: list[tuple[float, float]] = []  # (rounds, quality) per reduction
        self._quality_cache: dict[tuple, tuple[int, float, float]] = {}

    def direct(self, rounds: int = 1) -> None:
        """Charge rounds spent on plain neighbor exchanges."""
        if self.fidelity != "free":
            self.rounds += rounds

    def quality(self, p: ValidPartition) -> tuple[int, float, float]:
        key = p.part_of
        if key not in self._quality_cache:
            self._quality_cache[key] = quality(self.g, p, self.shortcuts(self.g, p))
        return self._quality_cache[key]

    def cost(self, p: ValidPartition) -> float:
        """Rounds one reduction over ``p`` would take, without charging them."""
        if self.fidelity == "free":
            return 0.0
        if self.fidelity == "accounted":
            c, d, _ = self.quality(p)
            return round_bound(c, d, self.g.n, self.alpha)
        res = partwise_aggregate(self.g, p, self.shortcuts(self.g, p), AggregateSpec((0,) * self.g.n, "min"))
        return float(res.stats.rounds)

    def reduce(self, p: ValidPartition, values: Sequence, op: str) -> list:
        """Per-part ``op``-aggregate of ``values`` (``None`` entries are identities)."""
        spec = AggregateSpec(tuple(values), op)
        self.operations += 1
        if self.fidelity == "free":
            return direct_reduce_parts(p, spec)
        if self.fidelity == "accounted":
            c, d, q = self.quality(p)
            cost = round_bound(c, d, self.g.n, self.alpha)
            self.rounds += cost
            self.max_quality = max(self.max_quality, q)
            self.op_log.append((cost, q))
            return direct_reduce_parts(p, spec)
        sc = self.shortcuts(self.g, p)
        res = partwise_aggregate(self.g, p, sc, spec, kappa=self.kappa)
        q = quality(self.g, p, sc)[2]
        self.rounds += res.stats.rounds
        self.violations += len(res.stats.violations)
        self.max_quality = max(self.max_quality, q)
        self.op_log.append((res.stats.rounds, q))
        out: list = [None] * len(p.parts)
        for v, i in enumerate(p.part_of):
            if i >= 0 and out[i] is None:
                out[i] = res.values[v]
        return out
