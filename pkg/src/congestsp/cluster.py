"""Heads/Tails hierarchical clustering of an embedded forest and the two
tree aggregates built on it (subtree sums and path-to-root prefix sums).

A :class:`ClusterHierarchy` stores one label array per level; a cluster is
labelled by its minimum vertex (its leader). Level 0 is the singleton
partition and the last level has one cluster per tree component.
"""
from __future__ import annotations

import math
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .graph import DisjointSet, WeightedGraph
from .partwise import PartwiseEngine, ValidPartition, combine

# (iteration, leader) -> True for Heads
CoinSource = Callable[[int, int], bool]


@dataclass
class RootedTree:
    """A forest embedded in a graph: ``parent[v]`` is -1 at component roots.

    ``edges`` are the graph edge indices of the forest.
    """

    n: int
    parent: np.ndarray
    parent_edge: np.ndarray
    depth: np.ndarray
    edges: frozenset[int]

    @classmethod
    def from_edges(cls, g: WeightedGraph, edge_ids, roots: Sequence[int] | None = None) -> "RootedTree":
        """Root each component of the forest ``edge_ids`` at its minimum vertex, or at the given roots."""
        edge_ids = frozenset(int(e) for e in edge_ids)
        adj: list[list[tuple[int, int]]] = [[] for _ in range(g.n)]
        ds = DisjointSet(g.n)
        for e in sorted(edge_ids):
            u, v, _ = g.edges[e]
            if not ds.union(u, v):
                raise ValueError(f"edge set contains a cycle through edge {e}")
            adj[u].append((v, e))
            adj[v].append((u, e))
        parent = np.full(g.n, -2, dtype=np.int64)
        parent_edge = np.full(g.n, -1, dtype=np.int64)
        depth = np.zeros(g.n, dtype=np.int64)
        order = list(roots or []) + list(range(g.n))
        for r in order:
            if parent[r] != -2:
                continue
            parent[r] = -1
            queue = deque([r])
            while queue:
                u = queue.popleft()
                for v, e in adj[u]:
                    if parent[v] == -2:
                        parent[v] = u
                        parent_edge[v] = e
                        depth[v] = depth[u] + 1
                        queue.append(v)
        return cls(g.n, parent, parent_edge, depth, edge_ids)

    @property
    def roots(self) -> list[int]:
        return [v for v in range(self.n) if self.parent[v] == -1]

    def component_root(self) -> np.ndarray:
        """Root of every vertex's component."""
        out = np.arange(self.n)
        for v in sorted(range(self.n), key=lambda x: self.depth[x]):
            if self.parent[v] >= 0:
                out[v] = out[self.parent[v]]
        return out

    def children(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.n)]
        for v in range(self.n):
            if self.parent[v] >= 0:
                out[self.parent[v]].append(v)
        return out

    def validate(self) -> None:
        for v in range(self.n):
            p = self.parent[v]
            if p >= 0 and self.depth[p] != self.depth[v] - 1:
                raise ValueError(f"depth of {v} is not one more than its parent's")


@dataclass
class ClusterHierarchy:
    levels: list[np.ndarray]  # levels[i][v] = leader of v's cluster in P_i
    tree: RootedTree
    rounds: float = 0.0
    attempts: int = 1
    merge_groups: list[dict[int, list[int]]] = field(default_factory=list, repr=False)

    @property
    def depth(self) -> int:
        """Number of merge iterations K (levels P_0..P_K)."""
        return len(self.levels) - 1

    def clusters(self, i: int) -> dict[int, list[int]]:
        out: dict[int, list[int]] = defaultdict(list)
        for v, c in enumerate(self.levels[i].tolist()):
            out[c].append(v)
        return dict(out)

    def parent_cluster(self, i: int, label: int) -> int:
        """Label of the level-(i+1) cluster containing level-i cluster ``label``."""
        return int(self.levels[i + 1][label])


def _tree_pairs(g: WeightedGraph, t: RootedTree) -> list[tuple[int, int]]:
    return [g.edges[e][:2] for e in sorted(t.edges)]


def heads_tails(
    g: WeightedGraph,
    t: RootedTree,
    rng: np.random.Generator | None = None,
    *,
    coins: CoinSource | None = None,
    engine: PartwiseEngine | None = None,
    max_levels: int | None = None,
    retries: int = 3,
) -> ClusterHierarchy:
    """Cluster the forest ``t`` by repeated random star contractions.

    Each iteration the leader (minimum vertex) of every cluster flips a fair
    coin; a Tails cluster with a Heads neighbor across a tree edge ``(h, t)``
    joins the cluster of ``h`` for the lexicographically smallest such pair.
    Iterations stop once every cluster spans its tree component.
    """
    if coins is None and rng is None:
        raise ValueError("need either an rng or an explicit coin source")
    if max_levels is None:
        max_levels = 10 * math.ceil(math.log2(max(g.n, 2))) + 50
    for attempt in range(retries + 1):
        h = _heads_tails_once(g, t, rng, coins, engine, max_levels)
        if h is not None:
            h.attempts = attempt + 1
            return h
    raise RuntimeError(f"Heads/Tails exceeded {max_levels} levels in {retries + 1} attempts")


def _heads_tails_once(g, t, rng, coins, engine, max_levels) -> ClusterHierarchy | None:
    n = g.n
    pairs = _tree_pairs(g, t)
    comp_size = np.bincount(t.component_root(), minlength=n)
    comp_of = t.component_root()
    label = np.arange(n)
    levels = [label.copy()]
    groups_log = []
    rounds0 = engine.rounds if engine else 0.0
    it = 0
    while True:
        sizes = np.bincount(label, minlength=n)
        if engine is not None:
            # leader election and size check, both part-wise reductions
            part = ValidPartition.from_labels(label.tolist())
            engine.reduce(part, list(range(n)), "min")
            engine.reduce(part, [1] * n, "sum")
        if all(sizes[label[v]] == comp_size[comp_of[v]] for v in range(n)):
            break
        if it >= max_levels:
            return None
        leaders = sorted(set(label.tolist()))
        if coins is not None:
            heads = {c: bool(coins(it, c)) for c in leaders}
        else:
            flips = rng.integers(0, 2, size=len(leaders))
            heads = {c: bool(f) for c, f in zip(leaders, flips.tolist())}
        best: dict[int, tuple[int, int]] = {}
        for u, v in pairs:
            for h, tl in ((u, v), (v, u)):
                ch, ct = label[h], label[tl]
                if ch != ct and heads[ch] and not heads[ct]:
                    msg = (h, tl)
                    if ct not in best or msg < best[ct]:
                        best[ct] = msg
        if engine is not None:
            part = ValidPartition.from_labels(label.tolist())
            engine.reduce(part, [0] * n, "min")  # coin broadcast from the leader
            engine.direct(1)  # (h, t) messages over inter-cluster tree edges
            msgs: list = [None] * n
            for ct, msg in best.items():
                msgs[msg[1]] = msg
            engine.reduce(part, msgs, "min")  # minimum message per Tails cluster
            engine.reduce(part, [0] * n, "min")  # merge broadcast
        target = {ct: int(label[msg[0]]) for ct, msg in best.items()}
        groups: dict[int, list[int]] = defaultdict(list)
        for ct, hc in target.items():
            groups[hc].append(ct)
        new_label = label.copy()
        members = defaultdict(list)
        for v in range(n):
            members[label[v]].append(v)
        for hc, tails in groups.items():
            leader = min([hc] + tails)
            for c in [hc] + tails:
                for v in members[c]:
                    new_label[v] = leader
        label = new_label
        levels.append(label.copy())
        groups_log.append(dict(groups))
        it += 1
    rounds = (engine.rounds - rounds0) if engine else 0.0
    return ClusterHierarchy(levels, t, rounds=rounds, merge_groups=groups_log)


def check_hierarchy(g: WeightedGraph, h: ClusterHierarchy) -> list[str]:
    """Verify the hierarchical clustering properties; returns a list of violations."""
    problems = []
    t = h.tree
    n = g.n
    pairs = _tree_pairs(g, t)
    if h.levels[0].tolist() != list(range(n)):
        problems.append("level 0 is not the singleton partition")
    comp = t.component_root()
    last = h.levels[-1]
    for v in range(n):
        if last[v] != last[comp[v]]:
            problems.append(f"final level splits the component of vertex {v}")
            break
    for u in range(n):
        if comp[u] != comp[last[u]]:
            problems.append(f"final cluster of {u} crosses components")
            break
    for i, lab in enumerate(h.levels):
        ds = DisjointSet(n)
        for u, v in pairs:
            if lab[u] == lab[v]:
                ds.union(u, v)
        roots = {}
        for v in range(n):
            r = ds.find(v)
            if roots.setdefault(lab[v], r) != r:
                problems.append(f"cluster {lab[v]} at level {i} is disconnected in the tree")
                break
        if i == 0:
            continue
        prev = h.levels[i - 1]
        inside: dict[int, set[int]] = defaultdict(set)
        for v in range(n):
            inside[int(lab[v])].add(int(prev[v]))
        nested = all(lab[v] == lab[w] for v in range(n) for w in [int(prev[v])])
        if not nested:
            problems.append(f"level {i - 1} clusters are not nested in level {i}")
        adj: dict[int, set[int]] = defaultdict(set)
        for u, v in pairs:
            a, b = int(prev[u]), int(prev[v])
            if a != b and lab[u] == lab[v]:
                adj[a].add(b)
                adj[b].add(a)
        for c, subs in inside.items():
            if len(subs) > 1 and _contracted_diameter(subs, adj) > 2:
                problems.append(f"cluster {c} at level {i} has contracted diameter above 2")
    return problems


def _contracted_diameter(nodes: set[int], adj) -> int:
    best = 0
    for s in nodes:
        dist = {s: 0}
        queue = deque([s])
        while queue:
            x = queue.popleft()
            for y in adj[x]:
                if y in nodes and y not in dist:
                    dist[y] = dist[x] + 1
                    queue.append(y)
        if len(dist) < len(nodes):
            return math.inf
        best = max(best, max(dist.values()))
    return best


# ---------------------------------------------------------------------------
# aggregates over the hierarchy


@dataclass
class _Step:
    child: int  # level-t cluster label
    depth: int  # BFS depth of the child among the subclusters of its parent
    outer: int  # vertex on the parent side of the connecting edge
    inner: int  # vertex of the child cluster, its root r(C_i)


def _schedule(g: WeightedGraph, h: ClusterHierarchy) -> list[list[_Step]]:
    """Per level t, the BFS steps over the level-t subclusters of every level-(t+1) cluster.

    Cluster roots are fixed top-down: the top cluster of each component keeps
    the tree root, a subcluster entered over edge ``(u, v)`` is rooted at ``v``.
    """
    t = h.tree
    pairs = _tree_pairs(g, t)
    top = len(h.levels) - 1
    root_of: dict[int, int] = {}  # cluster label at the current level -> root vertex
    for r in t.roots:
        root_of[int(h.levels[top][r])] = r
    steps: list[list[_Step]] = [[] for _ in range(top)]
    for lvl in range(top - 1, -1, -1):
        lab, up = h.levels[lvl], h.levels[lvl + 1]
        adj: dict[int, list[tuple[int, int, int]]] = defaultdict(list)
        for u, v in pairs:
            if up[u] == up[v] and lab[u] != lab[v]:
                adj[int(lab[u])].append((int(lab[v]), u, v))
                adj[int(lab[v])].append((int(lab[u]), v, u))
        next_root: dict[int, int] = {}
        for c, r in root_of.items():
            start = int(lab[r])
            next_root[start] = r
            seen = {start}
            queue = deque([(start, 0)])
            while queue:
                x, d = queue.popleft()
                for y, u, v in sorted(adj[x]):
                    if y not in seen:
                        seen.add(y)
                        next_root[y] = v
                        steps[lvl].append(_Step(y, d + 1, u, v))
                        queue.append((y, d + 1))
        root_of = next_root
    return steps


def aggregate_subtree(
    g: WeightedGraph,
    h: ClusterHierarchy,
    values: Sequence,
    op: str = "sum",
    engine: PartwiseEngine | None = None,
) -> list:
    """Every vertex gets the ``op``-aggregate of ``values`` over its subtree."""
    x = list(values)
    steps = _schedule(g, h)
    for lvl in range(len(steps) - 1, -1, -1):
        lab = h.levels[lvl]
        members: dict[int, list[int]] = defaultdict(list)
        for v, c in enumerate(lab.tolist()):
            members[c].append(v)
        by_depth = defaultdict(list)
        for s in steps[lvl]:
            by_depth[s.depth].append(s)
        part = ValidPartition.from_labels(lab.tolist()) if engine is not None else None
        for d in sorted(by_depth, reverse=True):
            if engine is not None:
                engine.reduce(part, x, op)
                engine.direct(1)
            for s in by_depth[d]:
                f = None
                for v in members[s.child]:
                    f = combine(op, f, x[v])
                x[s.outer] = combine(op, x[s.outer], f)
    return x


def aggregate_path_to_root(
    g: WeightedGraph,
    h: ClusterHierarchy,
    values: Sequence,
    op: str = "sum",
    engine: PartwiseEngine | None = None,
) -> list:
    """Every vertex gets the ``op``-aggregate of ``values`` on its path to the root, inclusive."""
    x = list(values)
    steps = _schedule(g, h)
    for lvl in range(len(steps)):
        lab = h.levels[lvl]
        members: dict[int, list[int]] = defaultdict(list)
        for v, c in enumerate(lab.tolist()):
            members[c].append(v)
        by_depth = defaultdict(list)
        for s in steps[lvl]:
            by_depth[s.depth].append(s)
        part = ValidPartition.from_labels(lab.tolist()) if engine is not None else None
        for d in sorted(by_depth):
            if engine is not None:
                engine.direct(1)
                engine.reduce(part, [None] * len(x), "min")  # broadcast of the received value
            for s in by_depth[d]:
                carried = x[s.outer]
                for v in members[s.child]:
                    x[v] = combine(op, x[v], carried)
    return x
