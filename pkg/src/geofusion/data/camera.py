"""Depth images, pinhole projection, and the simplified HHA-style encoding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BehindCameraError, DataError, DimensionError, EmptyCaptureError
from .cloud import PointCloud

# Camera frame: x right, y down (image v axis), z forward. The scene
# "up" direction is therefore -y; it stands in for the gravity-opposite
# direction in the height/angle channels below.
VERTICAL_AXIS = 1
UP = np.array([0.0, -1.0, 0.0])


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise DataError(f"focal lengths must be positive, got ({self.fx}, {self.fy})")


@dataclass
class DepthImage:
    """16-bit depth map in millimeters; zero marks an invalid pixel."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 2 or self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise DimensionError(f"depth must be a (H, W) image, got shape {self.values.shape}")
        if self.values.dtype != np.uint16:
            raise DataError(f"depth values must be uint16 millimeters, got {self.values.dtype}")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def _backproject_grid(depth: DepthImage, intrinsics: CameraIntrinsics, stride: int
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Back-project every stride-th pixel; returns (points (H',W',3), valid mask)."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    z_mm = depth.values[::stride, ::stride]
    vs, us = np.mgrid[0 : depth.height : stride, 0 : depth.width : stride]
    valid = z_mm > 0
    z = z_mm.astype(np.float64) / 1000.0
    x = (us - intrinsics.cx) * z / intrinsics.fx
    y = (vs - intrinsics.cy) * z / intrinsics.fy
    return np.stack([x, y, z], axis=-1), valid


def backproject(depth: DepthImage, intrinsics: CameraIntrinsics, stride: int = 1) -> PointCloud:
    """Pinhole back-projection of the decimated depth image (positions only).

    Invalid (zero-depth) pixels are skipped; an all-invalid capture raises.
    """
    points, valid = _backproject_grid(depth, intrinsics, stride)
    if not valid.any():
        raise EmptyCaptureError("no valid depth pixels to back-project")
    return PointCloud(positions=points[valid])


def project_to_pixel(point, intrinsics: CameraIntrinsics):
    """Inverse pinhole projection: camera-frame point(s) -> pixel (u, v).

    Accepts a single 3-vector or an (N, 3) array; depth must be positive.
    """
    p = np.asarray(point, dtype=np.float64)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    if p.shape[1] != 3:
        raise DimensionError(f"expected 3-vectors, got shape {p.shape}")
    z = p[:, 2]
    if (z <= 0).any():
        raise BehindCameraError("cannot project points with non-positive depth")
    u = p[:, 0] * intrinsics.fx / z + intrinsics.cx
    v = p[:, 1] * intrinsics.fy / z + intrinsics.cy
    uv = np.stack([u, v], axis=1)
    return (float(uv[0, 0]), float(uv[0, 1])) if single else uv


def _grid_normals(points: np.ndarray, valid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Surface normals on the decimated grid from neighbour cross-products.

    Tangents use central differences where both neighbours are valid, else
    one-sided differences. Normals are oriented toward the camera; a pixel
    with no usable tangent pair is marked invalid.
    """

    def tangent(axis: int) -> tuple[np.ndarray, np.ndarray]:
        fwd_pt = np.roll(points, -1, axis=axis)
        bwd_pt = np.roll(points, 1, axis=axis)
        fwd_ok = np.roll(valid, -1, axis=axis)
        bwd_ok = np.roll(valid, 1, axis=axis)
        # roll wraps around: kill the borders
        if axis == 0:
            fwd_ok[-1, :] = False
            bwd_ok[0, :] = False
        else:
            fwd_ok[:, -1] = False
            bwd_ok[:, 0] = False
        central = fwd_ok & bwd_ok
        forward = ~central & valid & fwd_ok
        backward = ~central & ~forward & valid & bwd_ok
        t = np.zeros_like(points)
        t[central] = fwd_pt[central] - bwd_pt[central]
        t[forward] = fwd_pt[forward] - points[forward]
        t[backward] = points[backward] - bwd_pt[backward]
        return t, central | forward | backward

    tv, ok_v = tangent(0)
    tu, ok_u = tangent(1)
    n = np.cross(tu, tv)
    norm = np.linalg.norm(n, axis=-1)
    ok = ok_u & ok_v & valid & (norm > 1e-12)
    n[ok] /= norm[ok][..., None]
    # orient toward the camera
    flip = (n * points).sum(axis=-1) > 0
    n[flip] = -n[flip]
    return n, ok


def simplified_hha(depth: DepthImage, intrinsics: CameraIntrinsics, stride: int = 1) -> PointCloud:
    """Back-projected cloud with three depth-derived channels in [0, 1].

    channel 0: disparity (1/z), min-max normalized over the capture;
    channel 1: height above the lowest point along the vertical axis,
    normalized over the capture; channel 2: angle between the local
    surface normal and the up direction, mapped [0, pi] -> [0, 1]. Pixels
    without a usable normal get the midpoint value. Channels 0-1 are
    normalized per capture, so they are dataset-independent.
    """
    points, valid = _backproject_grid(depth, intrinsics, stride)
    if not valid.any():
        raise EmptyCaptureError("no valid depth pixels")
    normals, normal_ok = _grid_normals(points, valid)

    p = points[valid]
    disparity = 1.0 / p[:, 2]
    ch0 = _minmax(disparity)
    height = p[:, VERTICAL_AXIS].max() - p[:, VERTICAL_AXIS]
    ch1 = _minmax(height)
    cosang = np.clip((normals[valid] * UP).sum(axis=-1), -1.0, 1.0)
    angle = np.arccos(cosang) / np.pi
    ch2 = np.where(normal_ok[valid], angle, 0.5)
    return PointCloud(positions=p, features=np.stack([ch0, ch1, ch2], axis=1))


def _minmax(x: np.ndarray) -> np.ndarray:
    span = x.max() - x.min()
    if span <= 0.0:
        return np.zeros_like(x)
    return (x - x.min()) / span
