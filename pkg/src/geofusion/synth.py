"""Synthetic labelled captures rendered with an analytic ray caster.

Scenes are built from axis-aligned planes (floor/walls) and spheres; the
depth image of a scene is the per-pixel nearest ray intersection, with
optional sensor-like millimeter noise and invalid speckle. Texture
feature maps are noise grids that can carry a localized hot patch.

Two variants:

"shapes" (3 classes): a room shell alone, with one sphere, or with two
spheres. Geometry separates the classes; texture maps are pure noise.

"xor" (2 classes): the shell plus one sphere placed randomly on the left
or right, and a texture hot patch placed independently on the left or
right. The label says whether the patch side matches the sphere side.
Neither sphere side nor patch side alone predicts the label, and the
image-mean of the texture map is side-blind, so each single modality is
capped at chance by construction; only the 3D co-location of patch and
sphere (hot cells lifted onto the near sphere cover far fewer fusion
groups than the same cells lifted onto the far wall) reveals the class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data.camera import CameraIntrinsics, DepthImage
from .data.capture import Capture

MAX_RANGE_M = 6.0


@dataclass(frozen=True)
class Plane:
    normal: tuple[float, float, float]
    offset: float  # points satisfy normal . p = offset


@dataclass(frozen=True)
class Sphere:
    center: tuple[float, float, float]
    radius: float


@dataclass(frozen=True)
class SynthSpec:
    variant: str = "shapes"
    n_train: int = 200
    n_test: int = 100
    image_width: int = 160
    image_height: int = 120
    focal: float = 100.0
    texture_stride: int = 8
    texture_channels: int = 4
    texture_noise: float = 0.1
    patch_gain: float = 1.0
    patch_radius_cells: float = 2.6
    depth_noise_mm: float = 3.0
    invalid_fraction: float = 0.02

    def __post_init__(self):
        if self.variant not in ("shapes", "xor"):
            raise ValueError(f"unknown synthetic variant {self.variant!r}")

    @property
    def n_classes(self) -> int:
        return 3 if self.variant == "shapes" else 2

    @property
    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(
            fx=self.focal,
            fy=self.focal,
            cx=self.image_width / 2.0,
            cy=self.image_height / 2.0,
        )


def render_depth(spec: SynthSpec, primitives, rng: np.random.Generator) -> DepthImage:
    """Per-pixel nearest intersection depth in uint16 millimeters."""
    k = spec.intrinsics
    vs, us = np.mgrid[0 : spec.image_height, 0 : spec.image_width]
    d = np.stack(
        [(us - k.cx) / k.fx, (vs - k.cy) / k.fy, np.ones_like(us, dtype=np.float64)],
        axis=-1,
    )
    z = np.full(d.shape[:2], np.inf)
    for prim in primitives:
        if isinstance(prim, Plane):
            n = np.asarray(prim.normal, dtype=np.float64)
            denom = d @ n
            with np.errstate(divide="ignore", invalid="ignore"):
                zp = prim.offset / denom
            zp = np.where((denom > 1e-9) & (zp > 1e-6), zp, np.inf)
        else:
            c = np.asarray(prim.center, dtype=np.float64)
            a = (d * d).sum(axis=-1)
            b = -2.0 * (d @ c)
            cc = c @ c - prim.radius**2
            disc = b * b - 4.0 * a * cc
            ok = disc >= 0
            zp = np.full_like(a, np.inf)
            root = (-b[ok] - np.sqrt(disc[ok])) / (2.0 * a[ok])
            zp[ok] = np.where(root > 1e-6, root, np.inf)
        z = np.minimum(z, zp)
    valid = np.isfinite(z) & (z <= MAX_RANGE_M)
    z_mm = z * 1000.0
    if spec.depth_noise_mm > 0:
        z_mm = z_mm + rng.normal(0.0, spec.depth_noise_mm, z.shape)
    mm = np.zeros(z.shape, dtype=np.float64)
    mm[valid] = np.clip(np.round(z_mm[valid]), 1, 65535)
    if spec.invalid_fraction > 0:
        mm[rng.random(z.shape) < spec.invalid_fraction] = 0
    return DepthImage(values=mm.astype(np.uint16))


def _shell(rng: np.random.Generator, side_wall: bool) -> list:
    prims = [
        Plane(normal=(0.0, 1.0, 0.0), offset=rng.uniform(0.78, 0.92)),  # floor (y down)
        Plane(normal=(0.0, 0.0, 1.0), offset=rng.uniform(2.8, 3.2)),  # back wall
    ]
    if side_wall:
        sign = 1.0 if rng.random() < 0.5 else -1.0
        prims.append(Plane(normal=(sign, 0.0, 0.0), offset=rng.uniform(1.0, 1.4)))
    return prims


def _sphere(rng: np.random.Generator, side: int | None = None) -> Sphere:
    if side is None:
        side = int(rng.random() < 0.5)
    sign = 1.0 if side else -1.0
    return Sphere(
        center=(
            sign * rng.uniform(0.5, 0.62),
            rng.uniform(0.1, 0.28),
            rng.uniform(1.25, 1.4),
        ),
        radius=rng.uniform(0.34, 0.4),
    )


def _texture_map(spec: SynthSpec, rng: np.random.Generator,
                 hot_px: tuple[float, float] | None = None) -> np.ndarray:
    h_cells = spec.image_height // spec.texture_stride
    w_cells = spec.image_width // spec.texture_stride
    fmap = rng.normal(0.0, spec.texture_noise,
                      (h_cells, w_cells, spec.texture_channels))
    if hot_px is not None:
        s = spec.texture_stride
        # pixel -> cell-grid coordinates (cell centres sit at (c+0.5)s-0.5)
        cu = (hot_px[0] + 0.5) / s - 0.5
        cv = (hot_px[1] + 0.5) / s - 0.5
        ci, cj = np.mgrid[0:h_cells, 0:w_cells]
        mask = (ci - cv) ** 2 + (cj - cu) ** 2 <= spec.patch_radius_cells**2
        fmap[mask, 0] += spec.patch_gain
        fmap[mask, 1] += spec.patch_gain
    return fmap


def _make_capture(spec: SynthSpec, rng: np.random.Generator, index: int) -> Capture:
    k = spec.intrinsics
    if spec.variant == "shapes":
        label = index % 3
        prims = _shell(rng, side_wall=True)
        if label == 1:
            prims.append(_sphere(rng))
        elif label == 2:
            prims.append(_sphere(rng, side=0))
            prims.append(_sphere(rng, side=1))
        fmap = _texture_map(spec, rng)
    else:
        geom_side, tex_side = ((0, 0), (0, 1), (1, 0), (1, 1))[index % 4]
        label = int(geom_side == tex_side)
        prims = _shell(rng, side_wall=False)
        sphere = _sphere(rng, side=geom_side)
        prims.append(sphere)
        # hot patch centred on the sphere's image position, possibly mirrored
        sx = abs(sphere.center[0]) * (1.0 if tex_side else -1.0)
        u = sx * k.fx / sphere.center[2] + k.cx
        v = sphere.center[1] * k.fy / sphere.center[2] + k.cy
        fmap = _texture_map(spec, rng, hot_px=(u, v))
    depth = render_depth(spec, prims, rng)
    return Capture(
        depth=depth,
        intrinsics=k,
        label=label,
        feature_map=fmap,
        feature_stride=spec.texture_stride,
    )


def synth_dataset(spec: SynthSpec, seed: int) -> tuple[list[Capture], list[Capture]]:
    """Deterministic train/test capture lists for the given seed."""
    splits = []
    for split_id, count in ((0, spec.n_train), (1, spec.n_test)):
        captures = []
        for i in range(count):
            rng = np.random.default_rng([seed, split_id, i])
            captures.append(_make_capture(spec, rng, i))
        splits.append(captures)
    return splits[0], splits[1]
