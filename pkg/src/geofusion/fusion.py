"""Fusion of lifted 2D texture features with 3D geometric features.

Texture feature-map cells are lifted to 3D through the depth image, both
modalities are linearly projected to a common width, the union of points
is grouped by nearest-voxel grouping, and each group emits a superpoint
whose feature is the concatenation of the per-modality means. A group
holding only one modality gets an all-ones vector for the missing half.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .data.camera import CameraIntrinsics
from .data.capture import Capture
from .data.cloud import PointCloud
from .errors import DataError, DimensionError, EmptyCaptureError
from .nn.layers import Linear
from .pooling import group_points

LAYOUTS = ("geometric-first", "texture-first")


@dataclass
class FusedCloud:
    """Superpoints carrying concatenated modality means.

    Features are (G, 2*d_fused): with the default "geometric-first" layout
    the first d_fused columns hold the geometric half. Presence flags mark
    which halves are real data rather than the all-ones filler.
    """

    positions: np.ndarray
    features: np.ndarray
    has_geom: np.ndarray
    has_tex: np.ndarray
    layout: str = "geometric-first"

    @property
    def n_groups(self) -> int:
        return self.positions.shape[0]


def lift_feature_map(capture: Capture) -> PointCloud:
    """Lift every feature-map cell into 3D through the depth image.

    Cell (i, j) at stride s corresponds to the full-resolution pixel
    centre ((j+0.5)s - 0.5, (i+0.5)s - 0.5); its depth is the nearest
    valid depth inside the cell's s x s footprint. Cells whose footprint
    has no valid depth are dropped.
    """
    if capture.feature_map is None:
        raise DataError("capture has no 2D feature map to lift")
    fmap = capture.feature_map
    s = capture.feature_stride
    depth = capture.depth.values
    k = capture.intrinsics
    h_cells, w_cells, _ = fmap.shape

    positions = []
    rows = []
    for i in range(h_cells):
        v0 = i * s
        v_centre = (i + 0.5) * s - 0.5
        for j in range(w_cells):
            u0 = j * s
            u_centre = (j + 0.5) * s - 0.5
            block = depth[v0 : v0 + s, u0 : u0 + s]
            valid = block > 0
            if not valid.any():
                continue
            bv, bu = np.nonzero(valid)
            d2 = (bu + u0 - u_centre) ** 2 + (bv + v0 - v_centre) ** 2
            pick = int(np.argmin(d2))  # ties: first in row-major footprint scan
            z = block[bv[pick], bu[pick]] / 1000.0
            positions.append(
                (
                    (u_centre - k.cx) * z / k.fx,
                    (v_centre - k.cy) * z / k.fy,
                    z,
                )
            )
            rows.append(fmap[i, j])
    if not positions:
        raise EmptyCaptureError("no feature-map cell has valid depth in its footprint")
    return PointCloud(positions=np.array(positions), features=np.array(rows))


def fuse(geom: PointCloud, tex: PointCloud, project_geom: Linear, project_tex: Linear,
         r: float, layout: str = "geometric-first") -> FusedCloud:
    fused, _ = _fuse_with_cache(geom, tex, project_geom, project_tex, r, layout)
    return fused


def _fuse_with_cache(geom: PointCloud, tex: PointCloud, project_geom: Linear,
                     project_tex: Linear, r: float, layout: str
                     ) -> tuple[FusedCloud, dict]:
    if layout not in LAYOUTS:
        raise ValueError(f"layout must be one of {LAYOUTS}")
    if project_geom.out_dim != project_tex.out_dim:
        raise DimensionError("both projections must share the fused width")
    if geom.features is None or tex.features is None:
        raise DataError("fusion needs feature-bearing clouds for both modalities")
    d_fused = project_geom.out_dim

    geom_proj = project_geom.forward(geom.features)
    tex_proj = project_tex.forward(tex.features)

    union = np.concatenate([geom.positions, tex.positions], axis=0)
    is_geom = np.zeros(union.shape[0], dtype=bool)
    is_geom[: geom.n_points] = True
    assignment, group_pos = group_points(union, r)
    n_groups = group_pos.shape[0]

    geom_sum, geom_count = kernels.group_sum(geom_proj, assignment[is_geom], n_groups)
    tex_sum, tex_count = kernels.group_sum(tex_proj, assignment[~is_geom], n_groups)
    has_geom = geom_count > 0
    has_tex = tex_count > 0

    geom_half = np.ones((n_groups, d_fused))
    geom_half[has_geom] = geom_sum[has_geom] / geom_count[has_geom, None]
    tex_half = np.ones((n_groups, d_fused))
    tex_half[has_tex] = tex_sum[has_tex] / tex_count[has_tex, None]

    halves = (geom_half, tex_half) if layout == "geometric-first" else (tex_half, geom_half)
    fused = FusedCloud(
        positions=group_pos,
        features=np.concatenate(halves, axis=1),
        has_geom=has_geom,
        has_tex=has_tex,
        layout=layout,
    )
    cache = {
        "geom": geom, "tex": tex,
        "assignment": assignment, "is_geom": is_geom,
        "geom_count": geom_count, "tex_count": tex_count,
        "d_fused": d_fused, "layout": layout,
    }
    return fused, cache


def fused_to_cloud(fused: FusedCloud) -> PointCloud:
    """FusedCloud as a plain point cloud for PLY export: the 2*d_fused
    feature columns followed by the two modality-presence flags."""
    flags = np.stack([fused.has_geom, fused.has_tex], axis=1).astype(np.float64)
    return PointCloud(
        positions=fused.positions,
        features=np.concatenate([fused.features, flags], axis=1),
    )


def late_fuse(geom_features: np.ndarray, tex_features: np.ndarray,
              layout: str = "geometric-first") -> np.ndarray:
    """Per-sample concatenation of branch features (the no-geometry
    baseline); the halves follow the same layout as `fuse`."""
    geom_features = np.atleast_2d(np.asarray(geom_features, dtype=np.float64))
    tex_features = np.atleast_2d(np.asarray(tex_features, dtype=np.float64))
    if layout not in LAYOUTS:
        raise ValueError(f"layout must be one of {LAYOUTS}")
    if geom_features.shape[0] != tex_features.shape[0]:
        raise DimensionError(
            f"batch mismatch: {geom_features.shape[0]} vs {tex_features.shape[0]}"
        )
    halves = (geom_features, tex_features)
    if layout == "texture-first":
        halves = (tex_features, geom_features)
    return np.concatenate(halves, axis=1)


class FusionStage:
    """Trainable fusion: two bias-free linear projections feeding `fuse`.

    Gradients flow through the per-group modality means into the
    projection weights (and, for completeness, into the input features);
    all-ones halves of single-modality groups receive no gradient.
    """

    def __init__(self, d_geom: int, d_tex: int, d_fused: int, r: float,
                 layout: str = "geometric-first",
                 rng: np.random.Generator | None = None):
        self.project_geom = Linear(d_geom, d_fused, bias=False, rng=rng)
        self.project_tex = Linear(d_tex, d_fused, bias=False, rng=rng)
        self.r = r
        self.layout = layout

    def params(self, prefix: str):
        yield from self.project_geom.params(f"{prefix}.project_geom")
        yield from self.project_tex.params(f"{prefix}.project_tex")

    def forward(self, geom: PointCloud, tex: PointCloud) -> tuple[FusedCloud, dict]:
        return _fuse_with_cache(geom, tex, self.project_geom, self.project_tex,
                                self.r, self.layout)

    def backward(self, cache: dict, grad_features: np.ndarray
                 ) -> tuple[np.ndarray, np.ndarray]:
        """grad_features: (G, 2*d_fused). Returns gradients w.r.t. the raw
        geometric and texture input features."""
        d = cache["d_fused"]
        if cache["layout"] == "geometric-first":
            g_geom_half, g_tex_half = grad_features[:, :d], grad_features[:, d:]
        else:
            g_tex_half, g_geom_half = grad_features[:, :d], grad_features[:, d:]
        assignment = cache["assignment"]
        is_geom = cache["is_geom"]

        d_geom_in = self._half_backward(
            self.project_geom, cache["geom"].features,
            assignment[is_geom], cache["geom_count"], g_geom_half)
        d_tex_in = self._half_backward(
            self.project_tex, cache["tex"].features,
            assignment[~is_geom], cache["tex_count"], g_tex_half)
        return d_geom_in, d_tex_in

    @staticmethod
    def _half_backward(projection: Linear, raw: np.ndarray, assignment: np.ndarray,
                       counts: np.ndarray, grad_half: np.ndarray) -> np.ndarray:
        dproj = grad_half[assignment] / counts[assignment][:, None]
        return projection.backward(raw, dproj)
