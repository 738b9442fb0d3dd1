"""Numba-jitted implementations of the hot kernels.

Semantics, tie-breaking, and per-segment accumulation order match
``numpy_impl`` exactly. Kernels are single-threaded on purpose: the
per-call work at typical cloud sizes is far smaller than the OpenMP
wake-up latency numba's parallel loops pay when interleaved with BLAS
calls, and serial loops keep results trivially thread-count independent.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def knn_edges(vectors, k, include_self):
    n, d = vectors.shape
    out = np.empty(n * k, dtype=np.int64)
    for i in range(n):
        best_d = np.full(k, np.inf)
        best_i = np.full(k, -1, dtype=np.int64)
        for j in range(n):
            if not include_self and j == i:
                continue
            d2 = 0.0
            for c in range(d):
                diff = vectors[i, c] - vectors[j, c]
                d2 += diff * diff
            if d2 >= best_d[k - 1]:
                continue
            # insertion keeping (distance, index) order; scanning j ascending
            # means equal distances already arrive in ascending index order
            pos = k - 1
            while pos > 0 and best_d[pos - 1] > d2:
                best_d[pos] = best_d[pos - 1]
                best_i[pos] = best_i[pos - 1]
                pos -= 1
            best_d[pos] = d2
            best_i[pos] = j
        for m in range(k):
            out[i * k + m] = best_i[m]
    return out


@njit(cache=True)
def _radius_counts(positions, r2):
    n = positions.shape[0]
    counts = np.zeros(n, dtype=np.int64)
    for i in range(n):
        c = 0
        for j in range(n):
            d2 = 0.0
            for k in range(positions.shape[1]):
                diff = positions[i, k] - positions[j, k]
                d2 += diff * diff
            if d2 <= r2 or j == i:
                c += 1
        counts[i] = c
    return counts


@njit(cache=True)
def _radius_fill(positions, r2, ptr, src):
    n = positions.shape[0]
    for i in range(n):
        w = ptr[i]
        for j in range(n):
            d2 = 0.0
            for k in range(positions.shape[1]):
                diff = positions[i, k] - positions[j, k]
                d2 += diff * diff
            if d2 <= r2 or j == i:
                src[w] = j
                w += 1


def radius_edges(positions, r):
    r2 = r * r
    counts = _radius_counts(positions, r2)
    ptr = np.zeros(positions.shape[0] + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    src = np.empty(ptr[-1], dtype=np.int64)
    _radius_fill(positions, r2, ptr, src)
    return src, ptr


@njit(cache=True)
def nearest_centroid(points, centroids):
    n = points.shape[0]
    g = centroids.shape[0]
    assign = np.empty(n, dtype=np.int64)
    for i in range(n):
        best = np.inf
        arg = 0
        for j in range(g):
            d2 = 0.0
            for k in range(points.shape[1]):
                diff = points[i, k] - centroids[j, k]
                d2 += diff * diff
            if d2 < best:  # strict: ties keep the lowest index
                best = d2
                arg = j
        assign[i] = arg
    return assign


@njit(cache=True)
def segment_sum(values, ptr):
    n = ptr.shape[0] - 1
    d = values.shape[1]
    out = np.zeros((n, d), dtype=values.dtype)
    for i in range(n):
        for e in range(ptr[i], ptr[i + 1]):
            for c in range(d):
                out[i, c] += values[e, c]
    return out


@njit(cache=True)
def edge_conv_forward(theta, xsrc, ptr):
    n = ptr.shape[0] - 1
    dout = theta.shape[1]
    din = theta.shape[2]
    out = np.zeros((n, dout), dtype=theta.dtype)
    for i in range(n):
        for e in range(ptr[i], ptr[i + 1]):
            for o in range(dout):
                acc = 0.0
                for c in range(din):
                    acc += theta[e, o, c] * xsrc[e, c]
                out[i, o] += acc
        deg = float(ptr[i + 1] - ptr[i])
        for o in range(dout):
            out[i, o] /= deg
    return out


@njit(cache=True)
def edge_conv_backward(theta, xsrc, src, ptr, gout, n_in):
    e_total = theta.shape[0]
    dout = theta.shape[1]
    din = theta.shape[2]
    n = ptr.shape[0] - 1
    dtheta = np.empty((e_total, dout, din), dtype=theta.dtype)
    dx = np.zeros((n_in, din), dtype=xsrc.dtype)
    dmsg = np.empty(dout, dtype=theta.dtype)
    for i in range(n):
        deg = float(ptr[i + 1] - ptr[i])
        for o in range(dout):
            dmsg[o] = gout[i, o] / deg
        for e in range(ptr[i], ptr[i + 1]):
            s = src[e]
            for o in range(dout):
                g = dmsg[o]
                for c in range(din):
                    dtheta[e, o, c] = g * xsrc[e, c]
            for c in range(din):
                acc = 0.0
                for o in range(dout):
                    acc += theta[e, o, c] * dmsg[o]
                dx[s, c] += acc
    return dtheta, dx


@njit(cache=True)
def group_sum(values, assign, n_groups):
    n, d = values.shape
    sums = np.zeros((n_groups, d), dtype=values.dtype)
    counts = np.zeros(n_groups, dtype=np.int64)
    for i in range(n):
        g = assign[i]
        counts[g] += 1
        for c in range(d):
            sums[g, c] += values[i, c]
    return sums, counts


@njit(cache=True)
def group_max(values, assign, n_groups):
    n, d = values.shape
    gmax = np.full((n_groups, d), -np.inf, dtype=values.dtype)
    winner = np.full((n_groups, d), n, dtype=np.int64)
    for i in range(n):
        g = assign[i]
        for c in range(d):
            if values[i, c] > gmax[g, c]:  # strict: first maximum wins
                gmax[g, c] = values[i, c]
                winner[g, c] = i
    return gmax, winner
