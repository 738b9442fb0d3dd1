"""Capture directories: depth + intrinsics + label + optional 2D features.

Layout of a capture directory:

    depth.png       16-bit grayscale PNG, millimeters (0 = invalid)
    intrinsics.txt  four whitespace-separated decimals: fx fy cx cy
    label.txt       single integer class id
    feat2d.bin      optional; parameter container with entries
                    "features" (H' x W' x F) and "stride" (scalar)
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import DataError, FormatError
from ..nn.checkpoint import read_container, write_container
from .camera import CameraIntrinsics, DepthImage


@dataclass
class Capture:
    depth: DepthImage
    intrinsics: CameraIntrinsics
    label: int | None = None
    feature_map: np.ndarray | None = None
    feature_stride: int | None = None
    rgb_path: str | None = None

    def __post_init__(self):
        if self.feature_map is not None:
            self.feature_map = np.asarray(self.feature_map, dtype=np.float64)
            if self.feature_map.ndim != 3:
                raise DataError("feature map must be (H', W', F)")
            if self.feature_stride is None or self.feature_stride < 1:
                raise DataError("feature map needs a positive downsample stride")
            h, w, _ = self.feature_map.shape
            if h * self.feature_stride > self.depth.height or w * self.feature_stride > self.depth.width:
                raise DataError(
                    f"feature grid {h}x{w} at stride {self.feature_stride} exceeds "
                    f"depth image {self.depth.height}x{self.depth.width}"
                )


def _read_depth_png(path: Path) -> DepthImage:
    img = Image.open(path)
    if img.mode not in ("I", "I;16", "I;16B", "I;16L"):
        raise FormatError(f"{path}: expected 16-bit grayscale depth, got mode {img.mode!r}")
    arr = np.asarray(img)
    if arr.max(initial=0) > np.iinfo(np.uint16).max or arr.min(initial=0) < 0:
        raise FormatError(f"{path}: depth values out of uint16 range")
    return DepthImage(values=arr.astype(np.uint16))


def load_capture(directory) -> Capture:
    d = Path(directory)
    depth_path = d / "depth.png"
    intr_path = d / "intrinsics.txt"
    label_path = d / "label.txt"
    for p in (depth_path, intr_path, label_path):
        if not p.exists():
            raise DataError(f"capture is missing {p.name} (in {d})")
    depth = _read_depth_png(depth_path)
    parts = intr_path.read_text().split()
    if len(parts) != 4:
        raise FormatError(f"{intr_path}: expected 'fx fy cx cy', got {len(parts)} fields")
    try:
        fx, fy, cx, cy = (float(p) for p in parts)
    except ValueError as exc:
        raise FormatError(f"{intr_path}: {exc}") from exc
    try:
        label = int(label_path.read_text().strip())
    except ValueError as exc:
        raise FormatError(f"{label_path}: expected a single integer ({exc})") from exc

    feature_map = None
    stride = None
    feat_path = d / "feat2d.bin"
    if feat_path.exists():
        entries = read_container(feat_path)
        if "features" not in entries or "stride" not in entries:
            raise FormatError(f"{feat_path}: needs 'features' and 'stride' entries")
        feature_map = entries["features"]
        stride = int(entries["stride"])
    return Capture(
        depth=depth,
        intrinsics=CameraIntrinsics(fx, fy, cx, cy),
        label=label,
        feature_map=feature_map,
        feature_stride=stride,
    )


def save_capture(capture: Capture, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    Image.fromarray(capture.depth.values).save(d / "depth.png")
    k = capture.intrinsics
    (d / "intrinsics.txt").write_text(f"{k.fx:.17g} {k.fy:.17g} {k.cx:.17g} {k.cy:.17g}\n")
    (d / "label.txt").write_text(f"{capture.label}\n")
    if capture.feature_map is not None:
        write_container(
            d / "feat2d.bin",
            {
                "features": capture.feature_map,
                "stride": np.int64(capture.feature_stride),
            },
        )


def list_captures(directory) -> list[Path]:
    """Capture subdirectories of a dataset split, sorted by name."""
    d = Path(directory)
    if not d.is_dir():
        raise DataError(f"dataset directory not found: {d}")
    subdirs = sorted(p for p in d.iterdir() if p.is_dir() and (p / "depth.png").exists())
    if not subdirs:
        raise DataError(f"no capture directories under {d}")
    return subdirs
