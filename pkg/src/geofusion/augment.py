"""Online point-cloud augmentations.

Applied in order: rotation about the vertical axis, horizontal mirror,
independent point removal, spherical random crop. Rotation and mirror
are isometries; the crop keeps exactly floor(N*f) points on clouds in
generic position.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data.camera import VERTICAL_AXIS
from .data.cloud import PointCloud
from .errors import DataError


@dataclass(frozen=True)
class AugmentationConfig:
    rotation_range: tuple[float, float] = (0.0, 2.0 * np.pi)
    mirror_prob: float = 0.5
    drop_prob: float = 0.2
    crop_range: tuple[float, float] = (0.875, 1.0)

    def __post_init__(self):
        if not (0.0 <= self.mirror_prob <= 1.0 and 0.0 <= self.drop_prob <= 1.0):
            raise ValueError("probabilities must lie in [0, 1]")
        lo, hi = self.crop_range
        if not (0.0 < lo <= hi <= 1.0):
            raise ValueError("crop factor range must be inside (0, 1]")


def rotate_vertical(positions: np.ndarray, theta: float) -> np.ndarray:
    """Rotate about the vertical axis through the cloud centroid; the
    vertical coordinate is untouched."""
    c, s = np.cos(theta), np.sin(theta)
    h0, h1 = (a for a in range(3) if a != VERTICAL_AXIS)
    centre = positions.mean(axis=0)
    r0 = positions[:, h0] - centre[h0]
    r1 = positions[:, h1] - centre[h1]
    out = positions.copy()  # vertical column stays bit-identical
    out[:, h0] = c * r0 - s * r1 + centre[h0]
    out[:, h1] = s * r0 + c * r1 + centre[h1]
    return out


def augment(cloud: PointCloud, cfg: AugmentationConfig,
            rng: np.random.Generator) -> PointCloud:
    if cloud.n_points < 2:
        raise DataError("augmentation needs at least two points")
    positions = rotate_vertical(cloud.positions, rng.uniform(*cfg.rotation_range))

    if rng.random() < cfg.mirror_prob:
        horiz = 0 if VERTICAL_AXIS != 0 else 1
        centre = positions[:, horiz].mean()
        positions = positions.copy()
        positions[:, horiz] = 2.0 * centre - positions[:, horiz]

    cloud = cloud.replace(positions=positions)

    keep = rng.random(cloud.n_points) >= cfg.drop_prob
    if not keep.any():
        keep[rng.integers(cloud.n_points)] = True
    cloud = cloud.select(keep)

    return random_crop(cloud, cfg.crop_range, rng)


def random_crop(cloud: PointCloud, factor_range: tuple[float, float],
                rng: np.random.Generator) -> PointCloud:
    """Keep the floor(N*f) points nearest to a random centre.

    The centre draws each coordinate uniformly inside the cloud's bounding
    box; the crop radius is the distance to the floor(N*f)-th nearest
    point and points at exactly that distance are kept.
    """
    n = cloud.n_points
    lo = cloud.positions.min(axis=0)
    hi = cloud.positions.max(axis=0)
    centre = rng.uniform(lo, hi)
    f = rng.uniform(*factor_range)
    dn = max(1, int(np.floor(n * f)))
    dist = np.linalg.norm(cloud.positions - centre, axis=1)
    radius = np.partition(dist, dn - 1)[dn - 1]
    return cloud.select(dist <= radius)
