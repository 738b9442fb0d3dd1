"""Point cloud container shared by every pipeline stage."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError, DimensionError


@dataclass
class PointCloud:
    """Positions in meters (camera frame) plus optional per-node features.

    `batch` carries the sample index when several clouds are concatenated;
    `label` the class id when the cloud is a training sample.
    """

    positions: np.ndarray
    features: np.ndarray | None = None
    batch: np.ndarray | None = None
    label: int | None = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise DimensionError(f"positions must be (N, 3), got {self.positions.shape}")
        if self.positions.shape[0] < 1:
            raise DataError("a point cloud needs at least one point")
        if not np.isfinite(self.positions).all():
            raise DataError("positions contain non-finite values")
        if self.features is not None:
            self.features = np.asarray(self.features, dtype=np.float64)
            if self.features.ndim != 2 or self.features.shape[0] != self.positions.shape[0]:
                raise DimensionError(
                    f"features must be (N, F) with N={self.positions.shape[0]}, "
                    f"got {self.features.shape}"
                )
            if not np.isfinite(self.features).all():
                raise DataError("features contain non-finite values")
        if self.batch is not None:
            self.batch = np.asarray(self.batch, dtype=np.int64)
            if self.batch.shape != (self.positions.shape[0],):
                raise DimensionError("batch must be (N,)")

    @property
    def n_points(self) -> int:
        return self.positions.shape[0]

    @property
    def feature_dim(self) -> int:
        return 0 if self.features is None else self.features.shape[1]

    def select(self, index: np.ndarray) -> "PointCloud":
        """Subset/reorder points by integer or boolean index."""
        return PointCloud(
            positions=self.positions[index],
            features=None if self.features is None else self.features[index],
            batch=None if self.batch is None else self.batch[index],
            label=self.label,
        )

    def replace(self, **kwargs) -> "PointCloud":
        data = {
            "positions": self.positions,
            "features": self.features,
            "batch": self.batch,
            "label": self.label,
        }
        data.update(kwargs)
        return PointCloud(**data)
