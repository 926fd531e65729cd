"""Kernel dispatch: the compiled extension when importable, else pure Python.

Set ``CONGESTSP_PURE=1`` to force the fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _pykernels

try:
    if os.environ.get("CONGESTSP_PURE"):
        raise ImportError("pure-Python kernels requested")
    from . import _ckernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"

# Path sums above this could overflow int64 inside the compiled kernel.
_SAFE_TOTAL = 1 << 62


def _as_i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def _fits(wt, n) -> bool:
    if len(wt) == 0:
        return True
    top = max(int(x) for x in wt) if not isinstance(wt, np.ndarray) or wt.dtype == object else int(wt.max())
    return top * max(n, 1) < _SAFE_TOTAL


def dijkstra(indptr, nbr, eid, wt, source, backend=None):
    n = len(indptr) - 1
    impl = _select(backend)
    if impl is not _pykernels and not _fits(wt, n):
        impl = _pykernels
    if impl is _pykernels:
        return _pykernels.dijkstra(indptr, nbr, eid, wt, int(source))
    return impl.dijkstra(_as_i64(indptr), _as_i64(nbr), _as_i64(eid), _as_i64(wt), int(source))


def race(indptr, nbr, eid, wt, start, backend=None):
    impl = _select(backend)
    if impl is _pykernels:
        return _pykernels.race(indptr, nbr, eid, wt, start)
    return impl.race(_as_i64(indptr), _as_i64(nbr), _as_i64(eid), _as_i64(wt), _as_i64(start))


def _select(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _pykernels
    if backend == "cython":
        if BACKEND != "cython":
            raise ImportError("compiled kernels are not built")
        return _impl
    raise ValueError(f"unknown backend {backend!r}")
