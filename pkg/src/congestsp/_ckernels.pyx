# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Semantics mirror ``_pykernels`` exactly."""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, realloc, free
from libc.stdint cimport int64_t

cnp.import_array()

cdef int64_t UNREACHABLE = (<int64_t>1) << 62


cdef struct Entry:
    int64_t a
    int64_t b
    int64_t c
    int64_t v


cdef inline bint less(Entry* x, Entry* y) nogil:
    if x.a != y.a:
        return x.a < y.a
    if x.b != y.b:
        return x.b < y.b
    if x.c != y.c:
        return x.c < y.c
    return x.v < y.v


cdef struct Heap:
    Entry* data
    Py_ssize_t size
    Py_ssize_t cap


cdef int heap_init(Heap* h, Py_ssize_t cap) except -1:
    if cap < 16:
        cap = 16
    h.data = <Entry*>malloc(cap * sizeof(Entry))
    if h.data == NULL:
        raise MemoryError()
    h.size = 0
    h.cap = cap
    return 0


cdef int heap_push(Heap* h, int64_t a, int64_t b, int64_t c, int64_t v) except -1:
    cdef Entry* grown
    cdef Py_ssize_t i, p
    cdef Entry tmp
    if h.size == h.cap:
        grown = <Entry*>realloc(h.data, 2 * h.cap * sizeof(Entry))
        if grown == NULL:
            raise MemoryError()
        h.data = grown
        h.cap *= 2
    i = h.size
    h.size += 1
    h.data[i].a = a
    h.data[i].b = b
    h.data[i].c = c
    h.data[i].v = v
    while i > 0:
        p = (i - 1) >> 1
        if less(&h.data[i], &h.data[p]):
            tmp = h.data[i]
            h.data[i] = h.data[p]
            h.data[p] = tmp
            i = p
        else:
            break
    return 0


cdef Entry heap_pop(Heap* h) nogil:
    cdef Entry top = h.data[0]
    cdef Py_ssize_t i = 0, l, r, m
    cdef Entry tmp
    h.size -= 1
    h.data[0] = h.data[h.size]
    while True:
        l = 2 * i + 1
        r = l + 1
        m = i
        if l < h.size and less(&h.data[l], &h.data[m]):
            m = l
        if r < h.size and less(&h.data[r], &h.data[m]):
            m = r
        if m == i:
            break
        tmp = h.data[i]
        h.data[i] = h.data[m]
        h.data[m] = tmp
        i = m
    return top


def dijkstra(const int64_t[::1] indptr, const int64_t[::1] nbr, const int64_t[::1] eid,
             const int64_t[::1] wt, Py_ssize_t source):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    dist_arr = np.full(n, UNREACHABLE, dtype=np.int64)
    parent_arr = np.full(n, -1, dtype=np.int64)
    done_arr = np.zeros(n, dtype=np.uint8)
    cdef int64_t[::1] dist = dist_arr
    cdef int64_t[::1] parent = parent_arr
    cdef unsigned char[::1] done = done_arr
    cdef Heap h
    cdef Entry top
    cdef Py_ssize_t k, v, u
    cdef int64_t nd
    heap_init(&h, n + 1)
    try:
        dist[source] = 0
        heap_push(&h, 0, -1, source, 0)
        while h.size > 0:
            top = heap_pop(&h)
            u = top.c
            if done[u]:
                continue
            done[u] = 1
            parent[u] = top.b
            for k in range(indptr[u], indptr[u + 1]):
                v = nbr[k]
                if done[v]:
                    continue
                nd = top.a + wt[k]
                if nd <= dist[v]:
                    dist[v] = nd
                    heap_push(&h, nd, eid[k], v, 0)
    finally:
        free(h.data)
    return dist_arr, parent_arr


def race(const int64_t[::1] indptr, const int64_t[::1] nbr, const int64_t[::1] eid,
         const int64_t[::1] wt, const int64_t[::1] start):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    root_arr = np.full(n, -1, dtype=np.int64)
    arrival_arr = np.zeros(n, dtype=np.int64)
    parent_arr = np.full(n, -1, dtype=np.int64)
    cdef int64_t[::1] root = root_arr
    cdef int64_t[::1] arrival = arrival_arr
    cdef int64_t[::1] parent = parent_arr
    cdef Heap h
    cdef Entry top
    cdef Py_ssize_t k, v, u
    heap_init(&h, 2 * n + 1)
    try:
        for u in range(n):
            heap_push(&h, start[u], u, -1, u)
        while h.size > 0:
            top = heap_pop(&h)
            u = top.v
            if root[u] >= 0:
                continue
            root[u] = top.b
            arrival[u] = top.a
            parent[u] = top.c
            for k in range(indptr[u], indptr[u + 1]):
                v = nbr[k]
                if root[v] < 0:
                    heap_push(&h, top.a + wt[k], top.b, eid[k], v)
    finally:
        free(h.data)
    return root_arr, arrival_arr, parent_arr
