"""Data model and ingestion: clouds, captures, projection, PLY I/O."""

from .cloud import PointCloud
from .camera import (
    CameraIntrinsics,
    DepthImage,
    backproject,
    project_to_pixel,
    simplified_hha,
)
from .ply import read_ply, write_ply
from .capture import Capture, load_capture, save_capture, list_captures

__all__ = [
    "PointCloud",
    "CameraIntrinsics",
    "DepthImage",
    "backproject",
    "project_to_pixel",
    "simplified_hha",
    "read_ply",
    "write_ply",
    "Capture",
    "load_capture",
    "save_capture",
    "list_captures",
]
