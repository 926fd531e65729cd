"""Weighted graphs, deterministic generators, edge-list I/O and metric queries.

Lengths are stored as fixed-point integers in units of ``1 / SCALE`` so that
arrival times and reweightings downstream stay exact.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import kernels

SCALE = 1 << 16
UNREACHABLE = 1 << 62
DEFAULT_WEIGHT_EXPONENT = 3


class GraphError(ValueError):
    """Malformed or invalid graph input."""


class GenerationError(RuntimeError):
    """A random generator could not produce a connected sample."""


def to_units(value) -> int:
    """Convert a length (int, float, Fraction, Decimal or decimal string) to fixed-point units."""
    if isinstance(value, str):
        try:
            value = Decimal(value.strip())
        except Exception as exc:  # decimal.InvalidOperation
            raise GraphError(f"not a decimal number: {value!r}") from exc
    if isinstance(value, float):
        if not math.isfinite(value):
            raise GraphError(f"non-finite length {value!r}")
        value = Fraction(value)
    if isinstance(value, Decimal):
        if not value.is_finite():
            raise GraphError(f"non-finite length {value!r}")
        value = Fraction(value)
    return round(Fraction(value) * SCALE)


def format_units(units: int) -> str:
    """Exact decimal rendering of a fixed-point quantity."""
    if units % SCALE == 0:
        return str(units // SCALE)
    with localcontext() as ctx:
        ctx.prec = 80
        text = format(Decimal(units) / Decimal(SCALE), "f")
    return text.rstrip("0").rstrip(".")


class DisjointSet:
    """Union-find with path halving; used for connectivity and zero-components."""

    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if ra < rb:
            self.parent[rb] = ra
        else:
            self.parent[ra] = rb
        return True

    def labels(self) -> list[int]:
        """Representative per element; the representative is the minimum member."""
        return [self.find(x) for x in range(len(self.parent))]


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Connected undirected graph with positive fixed-point edge lengths.

    ``edges`` holds ``(u, v, w)`` with ``u < v`` in lexicographic order, so an
    edge's index is computable by either endpoint from the two vertex ids.
    """

    n: int
    edges: tuple[tuple[int, int, int], ...]
    max_exponent: int = DEFAULT_WEIGHT_EXPONENT

    def __post_init__(self):
        if self.n < 1:
            raise GraphError("graph needs at least one vertex")
        canon = []
        for u, v, w in self.edges:
            u, v, w = int(u), int(v), int(w)
            if u == v:
                raise GraphError(f"self-loop at vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphError(f"edge ({u}, {v}) has an endpoint outside 0..{self.n - 1}")
            if u > v:
                u, v = v, u
            canon.append((u, v, w))
        canon.sort()
        for a, b in zip(canon, canon[1:]):
            if a[:2] == b[:2]:
                raise GraphError(f"duplicate edge ({a[0]}, {a[1]})")
        hi = self.max_weight_units
        for u, v, w in canon:
            if w < SCALE:
                raise GraphError(f"edge ({u}, {v}) has length {format_units(w)} < 1")
            if w > hi:
                raise GraphError(
                    f"edge ({u}, {v}) has length {format_units(w)} > n^{self.max_exponent}"
                )
        object.__setattr__(self, "edges", tuple(canon))
        if not self.is_connected():
            raise GraphError("graph is disconnected")

    @classmethod
    def from_lengths(cls, n: int, edges: Iterable[Sequence], max_exponent: int = DEFAULT_WEIGHT_EXPONENT):
        """Build from ``(u, v, length)`` triples with lengths in real units."""
        return cls(n, tuple((u, v, to_units(w)) for u, v, w in edges), max_exponent)

    def __eq__(self, other):
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        return self.n == other.n and self.edges == other.edges

    def __hash__(self):
        return hash((self.n, self.edges))

    def __repr__(self):
        return f"WeightedGraph(n={self.n}, m={self.m})"

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def max_weight_units(self) -> int:
        return self.n**self.max_exponent * SCALE

    @cached_property
    def adjacency(self) -> list[list[tuple[int, int]]]:
        """Per vertex, ``(neighbor, edge index)`` pairs sorted by neighbor."""
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n)]
        for i, (u, v, _) in enumerate(self.edges):
            adj[u].append((v, i))
            adj[v].append((u, i))
        for row in adj:
            row.sort()
        return adj

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {(u, v): i for i, (u, v, _) in enumerate(self.edges)}

    def eid(self, u: int, v: int) -> int:
        return self.edge_index[(u, v) if u < v else (v, u)]

    @cached_property
    def weights(self) -> np.ndarray:
        return np.array([w for _, _, w in self.edges], dtype=np.int64)

    @cached_property
    def endpoints(self) -> np.ndarray:
        return np.array([(u, v) for u, v, _ in self.edges], dtype=np.int64).reshape(-1, 2)

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(indptr, neighbor, edge index)`` arrays over the adjacency."""
        return csr_from_edges(self.n, self.endpoints)

    def slot_weights(self, per_edge: np.ndarray | None = None) -> np.ndarray:
        """Per-CSR-slot lengths for a per-edge weight vector (defaults to the graph's)."""
        per_edge = self.weights if per_edge is None else np.asarray(per_edge, dtype=np.int64)
        return per_edge[self.csr[2]]

    def is_connected(self) -> bool:
        ds = DisjointSet(self.n)
        comps = self.n
        for u, v, _ in self.edges:
            if ds.union(u, v):
                comps -= 1
        return comps == 1

    def hop_distances(self, source: int) -> list[int]:
        dist = [-1] * self.n
        dist[source] = 0
        frontier = [source]
        while frontier:
            nxt = []
            for u in frontier:
                for v, _ in self.adjacency[u]:
                    if dist[v] < 0:
                        dist[v] = dist[u] + 1
                        nxt.append(v)
            frontier = nxt
        return dist

    @cached_property
    def hop_diameter(self) -> int:
        return max(max(self.hop_distances(s)) for s in range(self.n))

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.n};{self.max_exponent};".encode())
        for u, v, w in self.edges:
            h.update(f"{u},{v},{w};".encode())
        return h.hexdigest()


def csr_from_edges(n: int, endpoints: np.ndarray, edge_ids: np.ndarray | None = None):
    """CSR adjacency for an undirected (multi)graph given as an ``(m, 2)`` array."""
    endpoints = np.asarray(endpoints, dtype=np.int64).reshape(-1, 2)
    m = len(endpoints)
    if edge_ids is None:
        edge_ids = np.arange(m, dtype=np.int64)
    src = np.concatenate([endpoints[:, 0], endpoints[:, 1]])
    dst = np.concatenate([endpoints[:, 1], endpoints[:, 0]])
    eid = np.concatenate([edge_ids, edge_ids]).astype(np.int64)
    order = np.lexsort((eid, dst, src))
    src, dst, eid = src[order], dst[order], eid[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, dst, eid


# ---------------------------------------------------------------------------
# generators


GENERATOR_KINDS = ("grid", "random-geometric", "erdos-renyi-connected", "line", "star-of-paths", "file")
RETRY_BUDGET = 64


@dataclass(frozen=True)
class GraphSpec:
    """What to build: generator kind, size parameters, weight law and seed.

    ``weights`` is ``unit``, ``int:LO:HI`` (uniform integers) or ``real:LO:HI``
    (uniform reals rounded to the fixed-point grid).
    """

    kind: str
    size: tuple[int, ...] = ()
    p: float | None = None
    weights: str = "unit"
    seed: int = 0
    path: str | None = None
    max_exponent: int = DEFAULT_WEIGHT_EXPONENT

    @classmethod
    def parse(cls, text: str, weights: str = "unit", seed: int = 0) -> "GraphSpec":
        """Parse ``grid:16x16``, ``erdos-renyi-connected:64:0.2``, ``line:4``, ``file:PATH`` ..."""
        kind, _, rest = text.partition(":")
        aliases = {"er": "erdos-renyi-connected", "geometric": "random-geometric", "star": "star-of-paths"}
        kind = aliases.get(kind, kind)
        if kind not in GENERATOR_KINDS:
            raise GraphError(f"unknown graph kind {kind!r}")
        if kind == "file":
            return cls(kind, path=rest, weights=weights, seed=seed)
        parts = rest.split(":") if rest else []
        try:
            if kind == "grid":
                rows, _, cols = parts[0].partition("x")
                return cls(kind, (int(rows), int(cols or rows)), weights=weights, seed=seed)
            if kind in ("erdos-renyi-connected", "random-geometric"):
                return cls(kind, (int(parts[0]),), p=float(parts[1]), weights=weights, seed=seed)
            return cls(kind, (int(parts[0]),), weights=weights, seed=seed)
        except (IndexError, ValueError) as exc:
            raise GraphError(f"bad graph spec {text!r}") from exc

    def describe(self) -> str:
        if self.kind == "file":
            return f"file:{self.path}"
        size = "x".join(map(str, self.size)) if self.kind == "grid" else str(self.size[0])
        tail = f":{self.p}" if self.p is not None else ""
        return f"{self.kind}:{size}{tail}"


def _weight_sampler(law: str, n: int, rng: np.random.Generator, max_exponent: int):
    kind, *args = law.split(":")
    cap = n**max_exponent
    if kind == "unit":
        return lambda m: np.full(m, SCALE, dtype=np.int64)
    if kind in ("int", "real") and len(args) == 2:
        lo, hi = float(args[0]), float(args[1])
        if not (1 <= lo <= hi <= cap):
            raise GraphError(f"weight range [{lo}, {hi}] outside [1, n^{max_exponent}]")
        if kind == "int":
            return lambda m: rng.integers(int(lo), int(hi), endpoint=True, size=m).astype(np.int64) * SCALE
        return lambda m: np.clip(
            np.rint(rng.uniform(lo, hi, size=m) * SCALE).astype(np.int64), int(lo * SCALE), int(hi * SCALE)
        )
    raise GraphError(f"bad weight law {law!r}")


def _pairs_to_graph(n, pairs, law, rng, max_exponent) -> WeightedGraph:
    pairs = sorted({(min(u, v), max(u, v)) for u, v in pairs})
    ws = _weight_sampler(law, n, rng, max_exponent)(len(pairs))
    return WeightedGraph(n, tuple((u, v, int(w)) for (u, v), w in zip(pairs, ws)), max_exponent)


def _components(n, pairs) -> int:
    ds = DisjointSet(n)
    comps = n
    for u, v in pairs:
        if ds.union(u, v):
            comps -= 1
    return comps


def generate(spec: GraphSpec) -> WeightedGraph:
    """Build the graph described by ``spec``; a pure function of the spec and its seed."""
    if spec.kind == "file":
        return load(spec.path, max_exponent=spec.max_exponent)
    root = np.random.SeedSequence(spec.seed)
    if spec.kind == "grid":
        rows, cols = spec.size
        n = rows * cols
        pairs = []
        for r in range(rows):
            for c in range(cols):
                v = r * cols + c
                if c + 1 < cols:
                    pairs.append((v, v + 1))
                if r + 1 < rows:
                    pairs.append((v, v + cols))
    elif spec.kind == "line":
        n = spec.size[0]
        pairs = [(i, i + 1) for i in range(n - 1)]
    elif spec.kind == "star-of-paths":
        n = spec.size[0]
        length = max(1, math.isqrt(n))
        pairs = []
        starts = list(range(0, n, length))
        if len(starts) > 1 and n - starts[-1] < length:
            starts.pop()  # fold a short remainder into the last path
        bounds = starts[1:] + [n]
        for a, b in zip(starts, bounds):
            pairs.extend((i, i + 1) for i in range(a, b - 1))
            if a != 0:
                pairs.append((0, a))
    elif spec.kind in ("erdos-renyi-connected", "random-geometric"):
        n = spec.size[0]
        for attempt in range(RETRY_BUDGET):
            rng = np.random.default_rng(root.spawn(RETRY_BUDGET)[attempt])
            if spec.kind == "erdos-renyi-connected":
                iu, ju = np.triu_indices(n, k=1)
                keep = rng.random(len(iu)) < spec.p
                pairs = list(zip(iu[keep].tolist(), ju[keep].tolist()))
            else:
                pts = rng.random((n, 2))
                d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
                iu, ju = np.triu_indices(n, k=1)
                keep = d2[iu, ju] <= spec.p**2
                pairs = list(zip(iu[keep].tolist(), ju[keep].tolist()))
            if _components(n, pairs) == 1:
                return _pairs_to_graph(n, pairs, spec.weights, rng, spec.max_exponent)
        raise GenerationError(f"{spec.describe()} stayed disconnected after {RETRY_BUDGET} samples")
    else:
        raise GraphError(f"unknown graph kind {spec.kind!r}")
    if n < 2:
        raise GraphError("generators need n >= 2")
    rng = np.random.default_rng(root)
    return _pairs_to_graph(n, pairs, spec.weights, rng, spec.max_exponent)


# ---------------------------------------------------------------------------
# edge-list I/O


def parse_edge_list(text: str, max_exponent: int = DEFAULT_WEIGHT_EXPONENT) -> WeightedGraph:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise GraphError("empty edge list")
    head = lines[0].split()
    if len(head) != 2:
        raise GraphError(f"header must be 'n m', got {lines[0]!r}")
    try:
        n, m = int(head[0]), int(head[1])
    except ValueError as exc:
        raise GraphError(f"bad header {lines[0]!r}") from exc
    if len(lines) - 1 != m:
        raise GraphError(f"header announces {m} edges, found {len(lines) - 1}")
    edges = []
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split()
        if len(fields) != 3:
            raise GraphError(f"line {lineno}: expected 'u v w', got {line!r}")
        try:
            u, v = int(fields[0]), int(fields[1])
        except ValueError as exc:
            raise GraphError(f"line {lineno}: bad vertex id") from exc
        edges.append((u, v, to_units(fields[2])))
    return WeightedGraph(n, tuple(edges), max_exponent)


def format_edge_list(g: WeightedGraph) -> str:
    out = [f"{g.n} {g.m}"]
    out.extend(f"{u} {v} {format_units(w)}" for u, v, w in g.edges)
    return "\n".join(out) + "\n"


def load(path, max_exponent: int = DEFAULT_WEIGHT_EXPONENT) -> WeightedGraph:
    return parse_edge_list(Path(path).read_text(), max_exponent)


def store(g: WeightedGraph, path) -> None:
    Path(path).write_text(format_edge_list(g))


def parse_demands(text: str, n: int) -> list[int]:
    """Per-vertex signed demands in fixed-point units.

    The decimals must sum to zero within one unit; a residual unit is absorbed
    by the largest-magnitude demand so the vector balances exactly.
    """
    demands: list[int | None] = [None] * n
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 2:
            raise GraphError(f"line {lineno}: expected 'v d', got {line!r}")
        v = int(fields[0])
        if not 0 <= v < n or demands[v] is not None:
            raise GraphError(f"line {lineno}: bad or repeated vertex {v}")
        demands[v] = to_units(fields[1])
    if any(d is None for d in demands):
        raise GraphError("demands file must list every vertex")
    out = [int(d) for d in demands]
    total = sum(out)
    if abs(total) > 1:
        raise GraphError(f"demands sum to {format_units(total)}, not zero")
    if total:
        k = max(range(n), key=lambda i: (abs(out[i]), -i))
        out[k] -= total
    return out


def format_demands(demands: Sequence[int]) -> str:
    return "".join(f"{v} {format_units(d)}\n" for v, d in enumerate(demands))


# ---------------------------------------------------------------------------
# metric queries


@dataclass
class PathMetric:
    """Single-source distances in fixed-point units (``UNREACHABLE`` if none)."""

    source: int
    dist: np.ndarray
    parent_edge: np.ndarray = field(repr=False)

    def __getitem__(self, v):
        return int(self.dist[v])


def dijkstra(g: WeightedGraph, s: int, weights: np.ndarray | None = None) -> PathMetric:
    """Exact distances from ``s``; ``weights`` overrides per-edge lengths (zeros allowed)."""
    indptr, nbr, eid = g.csr
    dist, parent = kernels.dijkstra(indptr, nbr, eid, g.slot_weights(weights), s)
    return PathMetric(s, dist, parent)


def subgraph_dijkstra(n: int, edge_list, s: int) -> np.ndarray:
    """Distances from ``s`` over an arbitrary edge subset ``[(u, v, w), ...]`` on ``n`` vertices."""
    if len(edge_list) == 0:
        dist = np.full(n, UNREACHABLE, dtype=np.int64)
        dist[s] = 0
        return dist
    arr = np.asarray(edge_list, dtype=np.int64).reshape(-1, 3)
    indptr, nbr, eid = csr_from_edges(n, arr[:, :2])
    dist, _ = kernels.dijkstra(indptr, nbr, eid, arr[:, 2][eid], s)
    return dist
