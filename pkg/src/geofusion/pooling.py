"""Voxel pooling and nearest-voxel pooling.

Plain voxel pooling bins points into an axis-aligned grid of resolution r
(anchored at the coordinate origin) and replaces each occupied voxel with
the mean of its members. Nearest-voxel pooling additionally re-assigns
every point to its globally nearest voxel centroid before the groups are
finalized, which repairs the misgroupings plain voxel binning produces
near voxel borders; empty centroids are deleted.

Groups are ordered by the lexicographic order of their voxel keys, and a
point equidistant to several centroids goes to the one with the lowest
key, so results are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .data.cloud import PointCloud

POOL_AGGREGATIONS = ("average", "maximum")


@dataclass
class PoolResult:
    """Superpoint cloud plus the input-point -> group assignment."""

    cloud: PointCloud
    assignment: np.ndarray
    n_groups: int


def voxel_keys(positions: np.ndarray, r: float) -> np.ndarray:
    """Integer voxel index triple per point: floor(position / r)."""
    return np.floor(positions / r).astype(np.int64)


def _voxel_groups(positions: np.ndarray, r: float) -> tuple[np.ndarray, int]:
    """Assignment of each point to its voxel; group ids follow the
    lexicographic order of the occupied voxel keys."""
    keys = voxel_keys(positions, r)
    _, assignment = np.unique(keys, axis=0, return_inverse=True)
    return assignment.astype(np.int64), int(assignment.max()) + 1


def _group_positions(positions: np.ndarray, assignment: np.ndarray, n_groups: int
                     ) -> np.ndarray:
    sums, counts = kernels.group_sum(positions, assignment, n_groups)
    return sums / counts[:, None]


def _group_features(features: np.ndarray | None, assignment: np.ndarray,
                    n_groups: int, aggr: str) -> np.ndarray | None:
    if features is None:
        return None
    if aggr == "average":
        sums, counts = kernels.group_sum(features, assignment, n_groups)
        return sums / counts[:, None]
    gmax, _ = kernels.group_max(features, assignment, n_groups)
    return gmax


def voxel_pool(cloud: PointCloud, r: float, aggr: str = "average") -> PoolResult:
    """Replace the points of every occupied voxel with their centroid."""
    _check_args(r, aggr)
    assignment, n_groups = _voxel_groups(cloud.positions, r)
    return PoolResult(
        cloud=PointCloud(
            positions=_group_positions(cloud.positions, assignment, n_groups),
            features=_group_features(cloud.features, assignment, n_groups, aggr),
            label=cloud.label,
        ),
        assignment=assignment,
        n_groups=n_groups,
    )


def nearest_voxel_pool(cloud: PointCloud, r: float, aggr: str = "average") -> PoolResult:
    """Voxel centroids, then exact nearest-centroid re-assignment.

    Steps: (1) voxel centroids as in voxel_pool; (2) each point goes to
    its globally nearest centroid by L2 distance; (3) centroids left with
    no points are dropped; (4) superpoint positions/features come from the
    corrected groups.
    """
    _check_args(r, aggr)
    assignment = group_assignment(cloud.positions, r, method="nvp")
    n_groups = int(assignment.max()) + 1
    return PoolResult(
        cloud=PointCloud(
            positions=_group_positions(cloud.positions, assignment, n_groups),
            features=_group_features(cloud.features, assignment, n_groups, aggr),
            label=cloud.label,
        ),
        assignment=assignment,
        n_groups=n_groups,
    )


def group_assignment(positions: np.ndarray, r: float, method: str = "nvp") -> np.ndarray:
    """Grouping only (no feature handling); group ids are compact and keep
    the voxel-key order. method 'vp' skips the nearest-centroid step."""
    assignment, n_groups = _voxel_groups(positions, r)
    if method == "vp":
        return assignment
    if method != "nvp":
        raise ValueError(f"unknown grouping method {method!r}")
    centroids = _group_positions(positions, assignment, n_groups)
    assignment = kernels.nearest_centroid(np.ascontiguousarray(positions), centroids)
    # drop empty centroids, renumber compactly (np.unique keeps order)
    survivors, assignment = np.unique(assignment, return_inverse=True)
    return assignment.astype(np.int64)


def group_points(positions: np.ndarray, r: float, method: str = "nvp"
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Assignment plus group (mean) positions for the union-grouping used
    by the fusion stage."""
    assignment = group_assignment(positions, r, method)
    n_groups = int(assignment.max()) + 1
    return assignment, _group_positions(positions, assignment, n_groups)


def _check_args(r: float, aggr: str) -> None:
    if r <= 0:
        raise ValueError(f"pooling radius must be positive, got {r}")
    if aggr not in POOL_AGGREGATIONS:
        raise ValueError(f"aggregation must be one of {POOL_AGGREGATIONS}")


class PoolingLayer:
    """Differentiable wrapper: pools features through VP or NVP groups.

    Positions are data, not parameters; only the feature path carries
    gradients. Average pooling spreads the group gradient uniformly over
    members; maximum pooling routes it to the first member attaining the
    maximum.
    """

    def __init__(self, r: float, aggr: str = "average", method: str = "nvp"):
        _check_args(r, aggr)
        if method not in ("nvp", "vp"):
            raise ValueError(f"unknown pooling method {method!r}")
        self.r = r
        self.aggr = aggr
        self.method = method

    def forward(self, cloud: PointCloud) -> tuple[PointCloud, dict]:
        pool = nearest_voxel_pool if self.method == "nvp" else voxel_pool
        result = pool(cloud, self.r, self.aggr)
        cache: dict = {
            "assignment": result.assignment,
            "n_groups": result.n_groups,
            "n_points": cloud.n_points,
        }
        if self.aggr == "maximum" and cloud.features is not None:
            _, winner = kernels.group_max(cloud.features, result.assignment, result.n_groups)
            cache["winner"] = winner
        else:
            cache["counts"] = np.bincount(result.assignment, minlength=result.n_groups)
        return result.cloud, cache

    def backward(self, cache: dict, grad_features: np.ndarray) -> np.ndarray:
        assignment = cache["assignment"]
        if self.aggr == "average":
            counts = cache["counts"]
            return grad_features[assignment] / counts[assignment][:, None]
        dx = np.zeros((cache["n_points"], grad_features.shape[1]))
        winner = cache["winner"]
        cols = np.broadcast_to(np.arange(grad_features.shape[1]), winner.shape)
        np.add.at(dx, (winner.ravel(), cols.ravel()), grad_features.ravel())
        return dx
