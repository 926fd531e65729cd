"""Compare the compiled and pure-Python kernels on the same inputs.

    python bench/benchmark.py [--sizes 256 1024 4096] [--repeat 5]

Checks that both backends return identical arrays, then prints the median
wall time per call and the speedup.
"""
from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from congestsp import kernels
from congestsp.graph import GraphSpec, generate
from congestsp.ldd import DecompositionParams, sample_start_times


def timed(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), out


def bench_size(n: int, repeat: int) -> list[tuple]:
    side = int(round(n**0.5))
    g = generate(GraphSpec.parse(f"grid:{side}", weights="int:1:100", seed=n))
    indptr, nbr, eid = g.csr
    wt = g.slot_weights()
    starts = sample_start_times(g.n, DecompositionParams(0.1), np.random.default_rng(n)).start
    rows = []
    for name, call in (
        ("dijkstra", lambda b: kernels.dijkstra(indptr, nbr, eid, wt, 0, backend=b)),
        ("race", lambda b: kernels.race(indptr, nbr, eid, wt, starts, backend=b)),
    ):
        t_py, out_py = timed(lambda: call("python"), repeat)
        t_c, out_c = timed(lambda: call("cython"), repeat)
        same = all(np.array_equal(np.asarray(a, dtype=np.int64), b) for a, b in zip(out_py, out_c))
        rows.append((name, g.n, g.m, t_py, t_c, t_py / t_c, same))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--sizes", type=int, nargs="+", default=[256, 1024, 4096, 16384])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if kernels.BACKEND != "cython":
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation` first")
    print(f"{'kernel':<9} {'n':>6} {'m':>6} {'python ms':>10} {'cython ms':>10} {'speedup':>8}  same")
    for n in args.sizes:
        for name, nv, m, t_py, t_c, speed, same in bench_size(n, args.repeat):
            print(f"{name:<9} {nv:>6} {m:>6} {t_py * 1e3:>10.2f} {t_c * 1e3:>10.3f} {speed:>8.1f}  {same}")


if __name__ == "__main__":
    main()
