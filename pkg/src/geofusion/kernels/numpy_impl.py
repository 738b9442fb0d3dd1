"""Pure-numpy implementations of the hot kernels.

This is the fallback path, selected when numba is unavailable or the
``GEOFUSION_NO_NUMBA`` environment variable is set. Tie-breaking rules and
accumulation order are chosen to agree with ``numba_impl`` so that both
backends are interchangeable.
"""

from __future__ import annotations

import numpy as np

_CHUNK = 256  # row block for pairwise distance matrices


def sq_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared L2 distance matrix (len(a), len(b)), computed as sum((a-b)^2).

    The direct difference form (not the norm expansion) is used so exact
    ties come out identically in both backends.
    """
    return ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)


def knn_edges(vectors: np.ndarray, k: int, include_self: bool) -> np.ndarray:
    """Indices of the k nearest rows for every row of `vectors`.

    Returns shape (N*k,); entries [i*k:(i+1)*k] are node i's neighbours in
    ascending (distance, index) order. With include_self=False the row
    itself is excluded from the candidate set.
    """
    n = vectors.shape[0]
    out = np.empty(n * k, dtype=np.int64)
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        d2 = sq_distances(vectors[start:stop], vectors)
        if not include_self:
            d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        # stable sort on distances keeps ascending index order among ties
        order = np.argsort(d2, axis=1, kind="stable")
        out[start * k : stop * k] = order[:, :k].astype(np.int64).ravel()
    return out


def radius_edges(positions: np.ndarray, r: float) -> tuple[np.ndarray, np.ndarray]:
    """All source->target pairs with distance <= r, self-loops included.

    Returns (src, ptr): node i's incoming sources are src[ptr[i]:ptr[i+1]],
    in ascending index order.
    """
    n = positions.shape[0]
    r2 = r * r
    blocks = []
    counts = np.empty(n, dtype=np.int64)
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        d2 = sq_distances(positions[start:stop], positions)
        mask = d2 <= r2
        mask[np.arange(stop - start), np.arange(start, stop)] = True
        counts[start:stop] = mask.sum(axis=1)
        tgt_local, src = np.nonzero(mask)  # row-major: sorted by (tgt, src)
        blocks.append(src.astype(np.int64))
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    return np.concatenate(blocks), ptr


def nearest_centroid(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Index of the closest centroid per point; ties go to the lowest index."""
    n = points.shape[0]
    assign = np.empty(n, dtype=np.int64)
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        d2 = sq_distances(points[start:stop], centroids)
        assign[start:stop] = np.argmin(d2, axis=1)  # argmin takes first minimum
    return assign


def segment_sum(values: np.ndarray, ptr: np.ndarray) -> np.ndarray:
    """Sum rows of `values` over contiguous segments given by CSR pointers.

    Every segment must be non-empty (graph contracts guarantee this).
    """
    return np.add.reduceat(values, ptr[:-1], axis=0)


def edge_conv_forward(theta: np.ndarray, xsrc: np.ndarray, ptr: np.ndarray) -> np.ndarray:
    """Per-node mean of per-edge filtered features.

    theta: (E, Dout, Din) per-edge filter matrices, xsrc: (E, Din) source
    features, ptr: incoming-edge CSR pointers (N+1). Returns (N, Dout).
    """
    msgs = np.matmul(theta, xsrc[:, :, None])[:, :, 0]
    deg = np.diff(ptr).astype(np.float64)
    return segment_sum(msgs, ptr) / deg[:, None]


def edge_conv_backward(
    theta: np.ndarray,
    xsrc: np.ndarray,
    src: np.ndarray,
    ptr: np.ndarray,
    gout: np.ndarray,
    n_in: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of edge_conv_forward.

    Returns (dtheta (E,Dout,Din), dx (n_in,Din)) where dx accumulates the
    per-edge contribution theta^T @ dmsg onto each source node.
    """
    deg = np.diff(ptr).astype(np.float64)
    tgt = np.repeat(np.arange(ptr.shape[0] - 1), np.diff(ptr))
    dmsg = gout[tgt] / deg[tgt][:, None]  # (E, Dout)
    dtheta = dmsg[:, :, None] * xsrc[:, None, :]
    dxe = np.matmul(theta.transpose(0, 2, 1), dmsg[:, :, None])[:, :, 0]
    dx = np.zeros((n_in, xsrc.shape[1]), dtype=xsrc.dtype)
    np.add.at(dx, src, dxe)
    return dtheta, dx


def group_sum(values: np.ndarray, assign: np.ndarray, n_groups: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-group row sums and member counts for an arbitrary assignment."""
    sums = np.zeros((n_groups, values.shape[1]), dtype=values.dtype)
    np.add.at(sums, assign, values)
    counts = np.bincount(assign, minlength=n_groups).astype(np.int64)
    return sums, counts


def group_max(values: np.ndarray, assign: np.ndarray, n_groups: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-group elementwise maximum and the row index of the first maximum."""
    n, d = values.shape
    gmax = np.full((n_groups, d), -np.inf, dtype=values.dtype)
    np.maximum.at(gmax, assign, values)
    # first row achieving the max, per (group, column)
    winner = np.full((n_groups, d), n, dtype=np.int64)
    hit = values == gmax[assign]
    rows = np.where(hit, np.arange(n)[:, None], n)
    np.minimum.at(winner, assign, rows)
    return gmax, winner
