"""Pure-Python hot kernels; reference semantics for the compiled versions."""
from __future__ import annotations

import heapq

import numpy as np

UNREACHABLE = 1 << 62


def dijkstra(indptr, nbr, eid, wt, source):
    """Single-source shortest paths over CSR arrays with per-slot lengths.

    Equal-length relaxations are all queued and the heap order on
    ``(dist, edge, vertex)`` decides the parent, so every implementation
    that pops the same minimum key yields the same tree.
    """
    n = len(indptr) - 1
    indptr = indptr.tolist() if hasattr(indptr, "tolist") else list(indptr)
    nbr = nbr.tolist() if hasattr(nbr, "tolist") else list(nbr)
    eid = eid.tolist() if hasattr(eid, "tolist") else list(eid)
    wt = wt.tolist() if hasattr(wt, "tolist") else list(wt)
    dist = [UNREACHABLE] * n
    parent = [-1] * n
    done = [False] * n
    dist[source] = 0
    heap = [(0, -1, source)]
    while heap:
        d, e, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        parent[u] = e
        for k in range(indptr[u], indptr[u + 1]):
            v = nbr[k]
            if done[v]:
                continue
            nd = d + wt[k]
            if nd <= dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, eid[k], v))
    big = any(x >= UNREACHABLE for x in dist if x != UNREACHABLE)
    if big:
        return np.array(dist, dtype=object), np.array(parent, dtype=np.int64)
    return np.array(dist, dtype=np.int64), np.array(parent, dtype=np.int64)


def race(indptr, nbr, eid, wt, start):
    """Multi-source race: vertex ``u`` fires at ``start[u]``; claims go to the
    lexicographically smallest ``(arrival, root, edge)``.

    Returns ``(root, arrival, parent_edge)``; ``parent_edge`` is -1 at roots.
    """
    n = len(indptr) - 1
    indptr = indptr.tolist() if hasattr(indptr, "tolist") else list(indptr)
    nbr = nbr.tolist() if hasattr(nbr, "tolist") else list(nbr)
    eid = eid.tolist() if hasattr(eid, "tolist") else list(eid)
    wt = wt.tolist() if hasattr(wt, "tolist") else list(wt)
    start = start.tolist() if hasattr(start, "tolist") else list(start)
    root = [-1] * n
    arrival = [0] * n
    parent = [-1] * n
    heap = [(start[u], u, -1, u) for u in range(n)]
    heapq.heapify(heap)
    while heap:
        t, r, e, u = heapq.heappop(heap)
        if root[u] >= 0:
            continue
        root[u] = r
        arrival[u] = t
        parent[u] = e
        for k in range(indptr[u], indptr[u + 1]):
            v = nbr[k]
            if root[v] < 0:
                heapq.heappush(heap, (t + wt[k], r, eid[k], v))
    return (
        np.array(root, dtype=np.int64),
        np.array(arrival, dtype=np.int64),
        np.array(parent, dtype=np.int64),
    )
