#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the full persistent-homology extraction (pairwise distances, edge
sort, union-find sweep) plus the individual kernels, at several cloud
sizes.  Run after `pip install -e .`:

    python benchmarks/bench_backends.py --sizes 16,32,64,128,256 --d 64
"""

import argparse
import time

import numpy as np

from topoalign import _kernels
from topoalign.backend import NUMBA_AVAILABLE
from topoalign.persistence import _mst_python


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="16,32,64,128", help="comma-separated n values")
    parser.add_argument("--d", type=int, default=64)
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    sizes = [int(s) for s in args.sizes.split(",")]
    rng = np.random.default_rng(args.seed)
    clouds = {n: rng.normal(size=(n, args.d)) for n in sizes}

    rows = []
    if NUMBA_AVAILABLE:
        _kernels.mst_arrays_numba(clouds[sizes[0]])  # compile before timing
        _kernels.pairwise_numba(clouds[sizes[0]])
    for n in sizes:
        pts = clouds[n]
        numpy_full = best_of(lambda: _mst_python(pts), args.repeats)
        numpy_pair = best_of(lambda: _kernels.pairwise_numpy(pts), args.repeats)
        if NUMBA_AVAILABLE:
            numba_full = best_of(lambda: _kernels.mst_arrays_numba(pts), args.repeats)
            numba_pair = best_of(lambda: _kernels.pairwise_numba(pts), args.repeats)
            rows.append((n, numpy_full, numba_full, numpy_pair, numba_pair))
        else:
            rows.append((n, numpy_full, None, numpy_pair, None))

    header = f"{'n':>6} {'extract/numpy':>14} {'extract/numba':>14} {'speedup':>8} {'pairwise/numpy':>15} {'pairwise/numba':>15}"
    print(f"d = {args.d}, repeats = {args.repeats} (best-of)")
    print(header)
    print("-" * len(header))
    for n, nf, bf, np_, bp in rows:
        if bf is not None:
            print(
                f"{n:>6} {nf * 1e3:>12.3f}ms {bf * 1e3:>12.3f}ms {nf / bf:>7.1f}x"
                f" {np_ * 1e3:>13.3f}ms {bp * 1e3:>13.3f}ms"
            )
        else:
            print(f"{n:>6} {nf * 1e3:>12.3f}ms {'n/a':>14} {'':>8} {np_ * 1e3:>13.3f}ms {'n/a':>15}")
    if not NUMBA_AVAILABLE:
        print("numba not importable: numpy fallback only")


if __name__ == "__main__":
    main()
