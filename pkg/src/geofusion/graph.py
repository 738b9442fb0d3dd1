"""Neighbourhood graphs (kNN / radius) and per-edge attribute vectors.

Edges are directed neighbour -> centre and stored grouped by centre
(CSR over incoming edges), which is the layout the convolution kernels
consume. Ties in kNN selection resolve to the lower node index, so graph
construction is fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionError

POSITIONAL_MODES = ("none", "cartesian", "spherical")
FEATURE_MODES = ("none", "offset", "l2")


@dataclass(frozen=True)
class NeighbourhoodGraph:
    """Directed neighbour->centre edge set over n_nodes points.

    src[e] -> tgt[e]; edges of centre i occupy src[ptr[i]:ptr[i+1]].
    Under the kNN policy each node has exactly k incoming edges (self-loop
    included when requested); under the radius policy at least its
    self-loop.
    """

    n_nodes: int
    src: np.ndarray
    tgt: np.ndarray
    ptr: np.ndarray
    policy: str
    param: float
    space: str = "euclidean"

    @property
    def n_edges(self) -> int:
        return self.src.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.ptr)


def knn_graph(vectors: np.ndarray, k: int, include_self: bool = True,
              space: str = "euclidean") -> NeighbourhoodGraph:
    """k nearest neighbours by L2 distance in the given vector space.

    The node itself counts as a candidate when include_self is set; exact
    distance ties resolve to the lower index.
    """
    vectors = np.ascontiguousarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[1] < 1:
        raise DimensionError(f"vectors must be (N, D), got {vectors.shape}")
    n = vectors.shape[0]
    limit = n if include_self else n - 1
    if not 1 <= k <= limit:
        raise DimensionError(
            f"k={k} out of range for {n} nodes (include_self={include_self})"
        )
    src = kernels.knn_edges(vectors, k, include_self)
    tgt = np.repeat(np.arange(n, dtype=np.int64), k)
    ptr = np.arange(0, (n + 1) * k, k, dtype=np.int64)
    return NeighbourhoodGraph(n, src, tgt, ptr, "knn", float(k), space)


def radius_graph(positions: np.ndarray, r: float, space: str = "euclidean"
                 ) -> NeighbourhoodGraph:
    """All neighbours within distance <= r, plus the self-loop."""
    positions = np.ascontiguousarray(positions, dtype=np.float64)
    if positions.ndim != 2:
        raise DimensionError(f"positions must be (N, D), got {positions.shape}")
    if r <= 0:
        raise ValueError(f"radius must be positive, got {r}")
    n = positions.shape[0]
    src, ptr = kernels.radius_edges(positions, float(r))
    tgt = np.repeat(np.arange(n, dtype=np.int64), np.diff(ptr))
    return NeighbourhoodGraph(n, src, tgt, ptr, "radius", float(r), space)


def cartesian_to_spherical(offsets: np.ndarray) -> np.ndarray:
    """(dx, dy, dz) -> (r, azimuth, inclination).

    azimuth = atan2(dy, dx) in (-pi, pi]; inclination = acos(dz/r) in
    [0, pi]. The zero vector (self-loops) maps to (0, 0, 0).
    """
    o = np.asarray(offsets, dtype=np.float64)
    single = o.ndim == 1
    o = np.atleast_2d(o)
    r = np.linalg.norm(o, axis=1)
    nonzero = r > 0
    az = np.arctan2(o[:, 1], o[:, 0])
    inc = np.zeros_like(r)
    inc[nonzero] = np.arccos(np.clip(o[nonzero, 2] / r[nonzero], -1.0, 1.0))
    az = np.where(nonzero, az, 0.0)
    out = np.stack([r, az, inc], axis=1)
    return out[0] if single else out


@dataclass(frozen=True)
class AttributeConfig:
    """Which per-edge attributes to compute.

    positional: none | cartesian | spherical (offset p_centre - p_neighbour)
    feature:    none | offset | l2          (offset X_centre - X_neighbour)
    """

    positional: str = "spherical"
    feature: str = "offset"

    def __post_init__(self):
        if self.positional not in POSITIONAL_MODES:
            raise ValueError(f"positional mode must be one of {POSITIONAL_MODES}")
        if self.feature not in FEATURE_MODES:
            raise ValueError(f"feature mode must be one of {FEATURE_MODES}")
        if self.positional == "none" and self.feature == "none":
            raise ValueError("at least one attribute mode must be enabled")

    def dim(self, feature_dim: int) -> int:
        d = 0 if self.positional == "none" else 3
        if self.feature == "offset":
            d += feature_dim
        elif self.feature == "l2":
            d += 1
        return d


@dataclass(frozen=True)
class EdgeAttributes:
    """Per-edge attribute rows (E, D), positional part first."""

    values: np.ndarray
    config: AttributeConfig


def edge_attributes(graph: NeighbourhoodGraph, positions: np.ndarray | None,
                    features: np.ndarray | None, config: AttributeConfig
                    ) -> EdgeAttributes:
    """Attribute vector per edge (j -> i): positional offset p_i - p_j
    (Cartesian or spherical) concatenated with the feature offset
    X_i - X_j (raw or as its L2 norm)."""
    parts = []
    if config.positional != "none":
        if positions is None:
            raise DimensionError("positional attributes need positions")
        off = positions[graph.tgt] - positions[graph.src]
        parts.append(cartesian_to_spherical(off) if config.positional == "spherical" else off)
    if config.feature != "none":
        if features is None:
            raise DimensionError("feature attributes requested but no features given")
        diff = features[graph.tgt] - features[graph.src]
        if config.feature == "offset":
            parts.append(diff)
        else:
            parts.append(np.linalg.norm(diff, axis=1, keepdims=True))
    return EdgeAttributes(values=np.concatenate(parts, axis=1), config=config)


def edge_attributes_backward(graph: NeighbourhoodGraph, features: np.ndarray | None,
                             config: AttributeConfig, grad_values: np.ndarray,
                             ) -> np.ndarray | None:
    """Gradient of edge_attributes w.r.t. the node features.

    The positional part is a function of positions only and contributes
    nothing. Returns (N, F) or None when the feature mode is 'none'.
    """
    if config.feature == "none" or features is None:
        return None
    start = 0 if config.positional == "none" else 3
    gfeat = grad_values[:, start:]
    dx = np.zeros_like(features)
    if config.feature == "offset":
        per_edge = gfeat
    else:
        diff = features[graph.tgt] - features[graph.src]
        norm = np.linalg.norm(diff, axis=1, keepdims=True)
        unit = np.divide(diff, norm, out=np.zeros_like(diff), where=norm > 0)
        per_edge = gfeat * unit  # d||v|| = v/||v||; zero offset contributes 0
    np.add.at(dx, graph.tgt, per_edge)
    np.subtract.at(dx, graph.src, per_edge)
    return dx


def edge_list_lines(graph: NeighbourhoodGraph, attrs: EdgeAttributes | None = None
                    ) -> list[str]:
    """Deterministic text dump: one "src tgt attr..." line per edge,
    ordered by (target, source)."""
    order = np.lexsort((graph.src, graph.tgt))
    lines = []
    for e in order:
        line = f"{graph.src[e]} {graph.tgt[e]}"
        if attrs is not None:
            line += " " + " ".join(f"{v:.17g}" for v in attrs.values[e])
        lines.append(line)
    return lines
