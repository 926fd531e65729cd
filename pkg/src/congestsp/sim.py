"""Synchronous CONGEST round engine.

Each round every awake node reads the messages delivered to it (those sent in
the previous round) and returns at most one message per incident edge. A node
that reports ``halt`` sleeps until a message reaches it. Message sizes are
measured in bits against a ``ceil(kappa * log2 n)`` budget; oversize messages
are logged, not dropped.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .graph import WeightedGraph

log = logging.getLogger(__name__)

DEFAULT_KAPPA = 8


class RandomnessSource:
    """Reproducible independent streams keyed by vertex or by trial index."""

    def __init__(self, seed: int):
        self.seed = int(seed)

    def vertex(self, v: int, attempt: int = 0) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(0, int(v), int(attempt))))

    def trial(self, i: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(1, int(i))))

    @classmethod
    def from_rng(cls, rng: np.random.Generator) -> "RandomnessSource":
        return cls(int(rng.integers(0, 2**63 - 1)))


@dataclass
class NodeContext:
    vertex: int
    n: int
    neighbors: list[tuple[int, int, int]]  # (neighbor, edge index, length)
    rng: np.random.Generator


class NodeProgram:
    """Per-node program. Subclasses keep all state on ``self``."""

    def setup(self, ctx: NodeContext) -> None:
        self.ctx = ctx

    def step(self, rnd: int, inbox: Mapping[int, object]) -> tuple[dict[int, object], bool]:
        raise NotImplementedError


def message_bits(msg) -> int:
    """Size of a message made of ints, bools and None (nested tuples allowed)."""
    if msg is None or isinstance(msg, bool):
        return 1
    if isinstance(msg, (int, np.integer)):
        x = int(msg)
        return max(1, abs(x).bit_length()) + (1 if x < 0 else 0)
    if isinstance(msg, (tuple, list)):
        return sum(message_bits(x) for x in msg) or 1
    raise TypeError(f"unsupported message payload {type(msg).__name__}")


def bit_budget(n: int, kappa: float = DEFAULT_KAPPA) -> int:
    return math.ceil(kappa * math.log2(max(n, 2)))


@dataclass
class RunStats:
    rounds: int = 0
    max_bits: int = 0
    edge_messages: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    edge_bits: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    violations: list[tuple[int, int, int, int]] = field(default_factory=list)  # (round, src, dst, bits)
    budget_bits: int = 0
    timed_out: bool = False

    @property
    def messages(self) -> int:
        return int(self.edge_messages.sum())


def measure(stats: RunStats) -> dict:
    return {
        "rounds": stats.rounds,
        "max_bits": stats.max_bits,
        "max_edge_load": int(stats.edge_messages.max()) if len(stats.edge_messages) else 0,
        "messages": stats.messages,
        "violations": len(stats.violations),
        "timed_out": stats.timed_out,
    }


def run(
    g: WeightedGraph,
    programs: Sequence[NodeProgram] | Callable[[int], NodeProgram],
    max_rounds: int = 100_000,
    kappa: float = DEFAULT_KAPPA,
    seed: int = 0,
) -> tuple[list[NodeProgram], RunStats]:
    """Execute node programs until every node halts with nothing in flight."""
    if callable(programs):
        programs = [programs(v) for v in range(g.n)]
    programs = list(programs)
    if len(programs) != g.n:
        raise ValueError(f"need one program per vertex, got {len(programs)} for n={g.n}")
    source = RandomnessSource(seed)
    adjacency = g.adjacency
    weights = g.weights
    for v, prog in enumerate(programs):
        nbrs = [(u, e, int(weights[e])) for u, e in adjacency[v]]
        prog.setup(NodeContext(v, g.n, nbrs, source.vertex(v)))
    neighbor_edge = [{u: e for u, e in adjacency[v]} for v in range(g.n)]

    stats = RunStats(
        edge_messages=np.zeros(g.m, dtype=np.int64),
        edge_bits=np.zeros(g.m, dtype=np.int64),
        budget_bits=bit_budget(g.n, kappa),
    )
    awake = set(range(g.n))
    inflight: dict[int, dict[int, object]] = {}
    last_send = -1
    rnd = 0
    while awake or inflight:
        if rnd >= max_rounds:
            stats.timed_out = True
            log.warning("round budget %d exhausted with %d nodes awake", max_rounds, len(awake))
            break
        delivered, inflight = inflight, {}
        for v in sorted(awake | delivered.keys()):
            out, halt = programs[v].step(rnd, delivered.get(v, {}))
            for u, msg in out.items():
                e = neighbor_edge[v].get(u)
                if e is None:
                    raise ValueError(f"node {v} sent to non-neighbor {u}")
                bits = message_bits(msg)
                stats.edge_messages[e] += 1
                stats.edge_bits[e] += bits
                stats.max_bits = max(stats.max_bits, bits)
                if bits > stats.budget_bits:
                    stats.violations.append((rnd, v, u, bits))
                inflight.setdefault(u, {})[v] = msg
                last_send = rnd
            if halt:
                awake.discard(v)
            else:
                awake.add(v)
        rnd += 1
    stats.rounds = last_send + 1
    return programs, stats


# ---------------------------------------------------------------------------
# small reference programs


class Flood(NodeProgram):
    """Broadcast one bit from ``origin``; records the round it arrived."""

    def __init__(self, origin: int):
        self.origin = origin
        self.heard_at: int | None = None

    def step(self, rnd, inbox):
        if self.heard_at is not None:
            return {}, True
        if self.ctx.vertex == self.origin and rnd == 0:
            self.heard_at = 0
        elif inbox:
            self.heard_at = rnd
        else:
            return {}, rnd > 0 or self.ctx.vertex != self.origin
        senders = set(inbox)
        return {u: 1 for u, _, _ in self.ctx.neighbors if u not in senders}, True


class BfsLayers(NodeProgram):
    """Hop-distance layering from ``origin``: layer = round of first contact."""

    def __init__(self, origin: int):
        self.origin = origin
        self.layer: int | None = None

    def step(self, rnd, inbox):
        if self.layer is None:
            if self.ctx.vertex == self.origin:
                self.layer = 0
            elif inbox:
                self.layer = min(inbox.values()) + 1
            else:
                return {}, True
            return {u: self.layer for u, _, _ in self.ctx.neighbors}, True
        return {}, True
