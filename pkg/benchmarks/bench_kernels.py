#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Runs every hot kernel on representative workloads and prints the per-call
time of both backends plus the speedup. The active backend for library
code is chosen at import time (GEOFUSION_NO_NUMBA selects numpy); this
script always times both implementations directly.

Usage: python benchmarks/bench_kernels.py [--n 2000] [--repeat 20]
"""

import argparse
import time

import numpy as np

from geofusion.kernels import numba_impl, numpy_impl


def timeit(fn, repeat):
    fn()  # warm (includes jit compilation for the numba path)
    start = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - start) / repeat


def run(n, repeat):
    rng = np.random.default_rng(0)
    pts = rng.uniform(-2, 2, size=(n, 3))
    k = 9
    e = n * k
    d_in, d_out = 16, 32
    theta = rng.normal(size=(e, d_out, d_in))
    xsrc = rng.normal(size=(e, d_in))
    src = rng.integers(0, n, size=e).astype(np.int64)
    ptr = np.arange(0, (n + 1) * k, k, dtype=np.int64)
    gout = rng.normal(size=(n, d_out))
    centroids = rng.uniform(-2, 2, size=(max(4, n // 20), 3))
    assign = rng.integers(0, 64, size=n).astype(np.int64)
    feats = rng.normal(size=(n, d_in))

    cases = {
        f"knn_edges (N={n}, k={k})": (
            lambda impl: impl.knn_edges(pts, k, True)),
        f"radius_edges (N={n}, r=0.35)": (
            lambda impl: impl.radius_edges(pts, 0.35)),
        f"nearest_centroid (N={n}, G={len(centroids)})": (
            lambda impl: impl.nearest_centroid(pts, centroids)),
        f"edge_conv_forward (E={e}, {d_out}x{d_in})": (
            lambda impl: impl.edge_conv_forward(theta, xsrc, ptr)),
        f"edge_conv_backward (E={e})": (
            lambda impl: impl.edge_conv_backward(theta, xsrc, src, ptr, gout, n)),
        f"group_sum (N={n}, G=64)": (
            lambda impl: impl.group_sum(feats, assign, 64)),
        f"group_max (N={n}, G=64)": (
            lambda impl: impl.group_max(feats, assign, 64)),
    }

    print(f"{'kernel':44s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}")
    for name, call in cases.items():
        t_np = timeit(lambda: call(numpy_impl), repeat)
        t_nb = timeit(lambda: call(numba_impl), repeat)
        print(f"{name:44s} {t_np * 1e3:8.2f}ms {t_nb * 1e3:8.2f}ms {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=2000, help="point count")
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()
    run(args.n, args.repeat)
