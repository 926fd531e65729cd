"""Low-diameter decomposition with geometric start times.

Every vertex ``u`` draws ``delta_u ~ Geometric(beta)`` on ``{0, 1, ...}`` and
starts a BFS wave at ``t_u = (c / beta) ln n - delta_u``. A vertex joins the
first wave to reach it; ties go to the smaller ``(arrival, root, edge)``.
Times are fixed-point integers in units of ``1 / SCALE`` of the current length
scale ``R``.

Three executions of the same process are provided:

* :func:`decompose` - event-driven race (compiled kernel), any positive lengths;
* :func:`decompose_message` - genuine node programs on the CONGEST engine,
  a vertex reached at time ``t`` hears it in round ``floor(t)``;
* :func:`decompose_contracted` - the race on the contracted graph ``H``
  simulated inside the host network, one direct-edge step plus one part-wise
  min/broadcast per LDD round.
"""
from __future__ import annotations

import heapq
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import binomtest

from . import kernels, sim
from .graph import SCALE, DisjointSet, WeightedGraph, csr_from_edges, dijkstra
from .partwise import PARTWISE_ALPHA, Shortcut, ValidPartition, quality, round_bound


class FlaggedTrial(RuntimeError):
    """A start time came out negative (a ``delta`` exceeded ``(c / beta) ln n``)."""


@dataclass(frozen=True)
class DecompositionParams:
    beta: float
    c: float = 4.0
    scale: int = SCALE  # length unit R, fixed-point

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if self.c <= 0:
            raise ValueError("start-time constant c must be positive")
        if self.scale <= 0:
            raise ValueError("length scale must be positive")

    def check_size(self, n: int) -> None:
        if n >= 2 and self.beta < 1 / n:
            raise ValueError(f"beta={self.beta} below 1/n for n={n}")


def horizon(n: int, params: DecompositionParams) -> int:
    """``(c / beta) ln n`` in time units."""
    return round(params.c / params.beta * math.log(max(n, 1)) * SCALE)


@dataclass
class StartTimeAssignment:
    delta: np.ndarray
    start: np.ndarray  # fixed-point
    base: int

    @property
    def flagged(self) -> bool:
        return bool((self.start < 0).any())


def sample_start_times(count: int, params: DecompositionParams, rng: np.random.Generator, n: int | None = None):
    """Geometric shifts for ``count`` sources; ``n`` (default ``count``) sets the ``ln n`` deadline."""
    base = horizon(count if n is None else n, params)
    delta = rng.geometric(params.beta, size=count).astype(np.int64) - 1
    return StartTimeAssignment(delta, base - delta * SCALE, base)


@dataclass
class DecompositionResult:
    root: np.ndarray  # root vertex per vertex
    arrival: np.ndarray  # claim time per vertex, fixed-point
    parent_edge: np.ndarray  # BFS edge that delivered the claim, -1 at roots
    starts: StartTimeAssignment
    rounds: int
    fidelity: str = "event"
    stats: sim.RunStats | None = field(default=None, repr=False)

    @property
    def flagged(self) -> bool:
        return self.starts.flagged

    @property
    def tree_edges(self) -> set[int]:
        return {int(e) for e in self.parent_edge if e >= 0}

    def components(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = defaultdict(list)
        for v, r in enumerate(self.root.tolist()):
            out[r].append(v)
        return dict(out)

    def tree_radius(self, start_of_root) -> dict[int, int]:
        """Per root, the largest ``arrival - start(root)``: BFS-tree distance in time units."""
        out: dict[int, int] = {}
        for v, r in enumerate(self.root.tolist()):
            out[r] = max(out.get(r, 0), int(self.arrival[v] - start_of_root(r)))
        return out


def scaled_weights(weights: np.ndarray, params: DecompositionParams) -> np.ndarray:
    w = np.asarray(weights, dtype=object if np.asarray(weights).dtype == object else np.int64)
    if params.scale == SCALE:
        return np.asarray(w, dtype=np.int64) if w.dtype != object else w
    return np.array([int(x) * SCALE // params.scale for x in w.tolist()], dtype=object)


def _clamp(wt, starts: np.ndarray):
    # Lengths beyond every deadline never decide a claim; clamping keeps int64 safe.
    cap = int(starts.max()) - int(starts.min()) + SCALE
    return np.array([min(int(x), cap) for x in np.asarray(wt).tolist()], dtype=np.int64)


def _race_on(n, endpoints, edge_ids, wt, starts, backend=None):
    indptr, nbr, eid_slots = csr_from_edges(n, endpoints, edge_ids)
    order = {int(e): k for k, e in enumerate(np.asarray(edge_ids).tolist())}
    slot_w = np.array([wt[order[int(e)]] for e in eid_slots.tolist()], dtype=np.int64)
    return kernels.race(indptr, nbr, eid_slots, slot_w, starts, backend=backend)


def decompose(
    g: WeightedGraph,
    params: DecompositionParams,
    rng: np.random.Generator | None = None,
    *,
    start: Sequence[int] | None = None,
    weights: np.ndarray | None = None,
    backend: str | None = None,
) -> DecompositionResult:
    """Event-driven decomposition of ``g`` with lengths divided by ``params.scale``.

    ``start`` fixes the start times (fixed-point) instead of sampling them.
    """
    params.check_size(g.n)
    if start is None:
        starts = sample_start_times(g.n, params, rng)
    else:
        st = np.asarray(start, dtype=np.int64)
        starts = StartTimeAssignment(np.zeros(g.n, dtype=np.int64), st, int(st.max()))
    wt = _clamp(scaled_weights(g.weights if weights is None else weights, params), starts.start)
    indptr, nbr, eid = g.csr
    root, arrival, parent = kernels.race(indptr, nbr, eid, wt[eid], starts.start, backend=backend)
    return DecompositionResult(root, arrival, parent, starts, rounds=_ldd_rounds(starts))


def _ldd_rounds(starts: StartTimeAssignment) -> int:
    return max(0, -(-starts.base // SCALE))


# ---------------------------------------------------------------------------
# message-faithful execution


class LddRace(sim.NodeProgram):
    """Continuous-time BFS: a claim at time ``t`` is forwarded as ``t + w`` and
    lands in round ``floor(t + w)``."""

    def __init__(self, start: int, scaled: dict[int, int]):
        self.start = start
        self.scaled = scaled  # edge index -> scaled length
        self.claim: tuple[int, int, int] | None = None
        self.outbox: dict[int, list[tuple[int, tuple]]] = defaultdict(list)

    def step(self, rnd, inbox):
        me = self.ctx.vertex
        if self.claim is None:
            cands = []
            edge_of = {u: e for u, e, _ in self.ctx.neighbors}
            for u, (t, r) in inbox.items():
                cands.append((t, r, edge_of[u]))
            if self.start // SCALE == rnd:
                cands.append((self.start, me, -1))
            if cands:
                self.claim = t, r, _ = min(cands)
                for u, e, _w in self.ctx.neighbors:
                    arrive = t + self.scaled[e]
                    send_round = arrive // SCALE - 1
                    self.outbox[send_round].append((u, (arrive, r)))
        out = dict(self.outbox.pop(rnd, []))
        return out, self.claim is not None and not self.outbox


def decompose_message(
    g: WeightedGraph,
    params: DecompositionParams,
    rng: np.random.Generator | None = None,
    *,
    start: Sequence[int] | None = None,
    weights: np.ndarray | None = None,
    kappa: float = sim.DEFAULT_KAPPA,
) -> DecompositionResult:
    """Run the decomposition as node programs; every scaled length must be >= 1."""
    params.check_size(g.n)
    if start is None:
        starts = sample_start_times(g.n, params, rng)
    else:
        st = np.asarray(start, dtype=np.int64)
        starts = StartTimeAssignment(np.zeros(g.n, dtype=np.int64), st, int(st.max()))
    wt = _clamp(scaled_weights(g.weights if weights is None else weights, params), starts.start)
    if len(wt) and wt.min() < SCALE:
        raise ValueError("message-faithful simulation needs every scaled length >= 1")
    shift = max(0, -(-(-int(starts.start.min())) // SCALE)) * SCALE
    programs = []
    for v in range(g.n):
        programs.append(LddRace(int(starts.start[v]) + shift, {e: int(wt[e]) for _, e in g.adjacency[v]}))
    programs, stats = sim.run(g, programs, kappa=kappa, max_rounds=10 * (starts.base + shift) // SCALE + 10)
    root = np.array([p.claim[1] for p in programs], dtype=np.int64)
    arrival = np.array([p.claim[0] - shift for p in programs], dtype=np.int64)
    parent = np.array([p.claim[2] for p in programs], dtype=np.int64)
    return DecompositionResult(root, arrival, parent, starts, rounds=stats.rounds, fidelity="message", stats=stats)


# ---------------------------------------------------------------------------
# contracted graphs


@dataclass
class ContractedGraph:
    """Host graph with the zero-length components of ``weights`` contracted.

    Parts are numbered by their minimum vertex; ``inter`` lists the host edges
    joining different parts as ``(part_a, part_b, weight, host edge)``.
    """

    host: WeightedGraph
    weights: list[int]
    part_of: np.ndarray
    parts: list[list[int]]
    inter: list[tuple[int, int, int, int]]

    @property
    def k(self) -> int:
        return len(self.parts)

    @property
    def leaders(self) -> list[int]:
        return [part[0] for part in self.parts]

    def partition(self) -> ValidPartition:
        return ValidPartition(tuple(int(i) for i in self.part_of))

    def check(self, R: int) -> None:
        for a, b, w, e in self.inter:
            if w < R:
                raise ValueError(f"edge {e} between parts {a} and {b} has weight {w} < R={R}")


def zero_components(n: int, edges, weights) -> list[int]:
    ds = DisjointSet(n)
    for (u, v, _), w in zip(edges, weights):
        if w == 0:
            ds.union(u, v)
    return ds.labels()


def contract(g: WeightedGraph, weights: Sequence[int]) -> ContractedGraph:
    weights = [int(w) for w in weights]
    labels = zero_components(g.n, g.edges, weights)
    part = ValidPartition.from_labels(labels)
    part_of = np.array(part.part_of, dtype=np.int64)
    inter = []
    for e, (u, v, _) in enumerate(g.edges):
        a, b = int(part_of[u]), int(part_of[v])
        if a != b:
            inter.append((a, b, weights[e], e))
    return ContractedGraph(g, weights, part_of, part.parts, inter)


def decompose_explicit(
    cg: ContractedGraph,
    params: DecompositionParams,
    rng: np.random.Generator | None = None,
    *,
    start: Sequence[int] | None = None,
    backend: str | None = None,
) -> DecompositionResult:
    """Race on the explicitly built multigraph ``H(w_H / R)``; result indexed by part."""
    k = cg.k
    if start is None:
        starts = sample_start_times(k, params, rng, n=cg.host.n)
    else:
        st = np.asarray(start, dtype=np.int64)
        starts = StartTimeAssignment(np.zeros(k, dtype=np.int64), st, int(st.max()))
    if cg.inter:
        ends = np.array([(a, b) for a, b, _, _ in cg.inter], dtype=np.int64)
        ids = np.array([e for *_, e in cg.inter], dtype=np.int64)
        wt = _clamp(scaled_weights(np.array([w for _, _, w, _ in cg.inter], dtype=object), params), starts.start)
    else:
        ends = np.zeros((0, 2), dtype=np.int64)
        ids = np.zeros(0, dtype=np.int64)
        wt = np.zeros(0, dtype=np.int64)
    root, arrival, parent = _race_on(k, ends, ids, wt, starts.start, backend=backend)
    return DecompositionResult(root, arrival, parent, starts, rounds=_ldd_rounds(starts))


def contracted_round_cost(cg: ContractedGraph, sc: Shortcut, alpha: float = PARTWISE_ALPHA) -> float:
    """Rounds charged per LDD round: one direct step plus a part-wise min and broadcast."""
    c, d, _ = quality(cg.host, cg.partition(), sc)
    return 1 + 2 * round_bound(c, d, cg.host.n, alpha)


def decompose_contracted(
    cg: ContractedGraph,
    params: DecompositionParams,
    sc: Shortcut | None,
    rng: np.random.Generator | None = None,
    *,
    start: Sequence[int] | None = None,
    round_cost: float | None = None,
) -> DecompositionResult:
    """Simulate the decomposition of ``H`` inside the host, round by round.

    Each LDD round first delivers the messages crossing inter-part edges that
    land in this round, then every part takes the minimum ``(time, root, edge)``
    it received (a part-wise min) and, if unclaimed, broadcasts the claim to
    all of its vertices, which forward ``time + w`` over their outgoing edges.
    The returned arrays are per host vertex; ``root`` holds root-part leaders.
    ``round_cost`` overrides the rounds charged per LDD round (computed from
    the shortcut quality when ``sc`` is given, else not charged).
    """
    k = cg.k
    leaders = cg.leaders
    if start is None:
        starts = sample_start_times(k, params, rng, n=cg.host.n)
    else:
        st = np.asarray(start, dtype=np.int64)
        starts = StartTimeAssignment(np.zeros(k, dtype=np.int64), st, int(st.max()))
    cap = int(starts.start.max()) - int(starts.start.min()) + SCALE
    out_edges: list[list[tuple[int, int, int]]] = [[] for _ in range(k)]
    for a, b, w, e in cg.inter:
        sw = min(int(w) * SCALE // params.scale, cap)
        if sw < SCALE:
            raise ValueError(f"edge {e} has scaled length below 1; contracted simulation needs w >= R")
        out_edges[a].append((b, sw, e))
        out_edges[b].append((a, sw, e))

    pending: dict[int, list[tuple[int, int, int, int]]] = defaultdict(list)
    for i in range(k):
        t = int(starts.start[i])
        pending[t // SCALE].append((t, leaders[i], -1, i))
    rounds_heap = list(pending)
    heapq.heapify(rounds_heap)
    claim: list[tuple[int, int, int] | None] = [None] * k
    left = k
    while left and rounds_heap:
        rnd = heapq.heappop(rounds_heap)
        best: dict[int, tuple[int, int, int]] = {}
        for t, r, e, target in pending.pop(rnd, ()):
            if claim[target] is None:
                key = (t, r, e)
                if target not in best or key < best[target]:
                    best[target] = key
        for target, key in best.items():
            claim[target] = key
            left -= 1
            t, r, _ = key
            for other, sw, e in out_edges[target]:
                if claim[other] is None:
                    arrive = t + sw
                    slot = arrive // SCALE
                    if slot not in pending:
                        heapq.heappush(rounds_heap, slot)
                    pending[slot].append((arrive, r, e, other))

    part_root = np.array([c[1] for c in claim], dtype=np.int64)
    part_arrival = np.array([c[0] for c in claim], dtype=np.int64)
    part_parent = np.array([c[2] for c in claim], dtype=np.int64)
    idx = cg.part_of
    ldd_rounds = _ldd_rounds(starts)
    if round_cost is None:
        round_cost = contracted_round_cost(cg, sc) if sc is not None else 0.0
    res = DecompositionResult(
        part_root[idx], part_arrival[idx], np.full(cg.host.n, -1, dtype=np.int64), starts,
        rounds=int(math.ceil(ldd_rounds * round_cost)), fidelity="round-accounted",
    )
    res.part_root = part_root
    res.part_parent = part_parent
    return res


# ---------------------------------------------------------------------------
# statistics


@dataclass
class PairRate:
    u: int
    v: int
    distance: float
    trials: int
    together: int
    ci_low: float
    ci_high: float

    @property
    def rate(self) -> float:
        return self.together / self.trials if self.trials else float("nan")

    @property
    def separation(self) -> float:
        return 1.0 - self.rate


def cut_probability_harness(
    g: WeightedGraph,
    params: DecompositionParams,
    pairs: Sequence[tuple[int, int]],
    trials: int,
    rng: np.random.Generator,
) -> list[PairRate]:
    """Empirical same-component rate per pair over un-flagged trials, with Wilson intervals."""
    together = np.zeros(len(pairs), dtype=np.int64)
    done = 0
    while done < trials:
        res = decompose(g, params, rng)
        if res.flagged:
            continue
        for i, (u, v) in enumerate(pairs):
            together[i] += res.root[u] == res.root[v]
        done += 1
    out = []
    for (u, v), k in zip(pairs, together.tolist()):
        d = dijkstra(g, u)[v] / params.scale
        ci = binomtest(k, trials).proportion_ci(confidence_level=0.95, method="wilson")
        out.append(PairRate(u, v, d, trials, k, ci.low, ci.high))
    return out


def format_decomposition(res: DecompositionResult) -> str:
    return "".join(f"{v} {int(r)} {int(t)}\n" for v, (r, t) in enumerate(zip(res.root, res.arrival)))


def store_decomposition(res: DecompositionResult, path) -> None:
    Path(path).write_text(format_decomposition(res))
