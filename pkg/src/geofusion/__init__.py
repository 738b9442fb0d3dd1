"""Graph-convolutional point-cloud classification with voxel pooling and
2D-3D feature fusion."""

__version__ = "0.1.0"

from .data import (
    Capture,
    CameraIntrinsics,
    DepthImage,
    PointCloud,
    backproject,
    load_capture,
    project_to_pixel,
    read_ply,
    simplified_hha,
    write_ply,
)
from .graph import (
    AttributeConfig,
    EdgeAttributes,
    NeighbourhoodGraph,
    cartesian_to_spherical,
    edge_attributes,
    knn_graph,
    radius_graph,
)
from .conv import DualNeighbourhoodConv, EdgeConditionedConv, FilterNet
from .pooling import (
    PoolResult,
    PoolingLayer,
    group_points,
    nearest_voxel_pool,
    voxel_pool,
)
from .fusion import (
    FusedCloud,
    FusionStage,
    fuse,
    fused_to_cloud,
    late_fuse,
    lift_feature_map,
)
from .augment import AugmentationConfig, augment
from .model import (
    BranchConfig,
    ClassifierHead,
    FusionClassifier,
    GeometricBranch,
    GeometricClassifier,
    Sample,
    TextureClassifier,
    classify,
    desk_branch_config,
)
from .metrics import MetricsReport, metrics_from_predictions
from .synth import SynthSpec, synth_dataset
from .train import TrainConfig, captures_to_samples, evaluate, fit

__all__ = [
    "__version__",
    "Capture",
    "CameraIntrinsics",
    "DepthImage",
    "PointCloud",
    "backproject",
    "load_capture",
    "project_to_pixel",
    "read_ply",
    "simplified_hha",
    "write_ply",
    "AttributeConfig",
    "EdgeAttributes",
    "NeighbourhoodGraph",
    "cartesian_to_spherical",
    "edge_attributes",
    "knn_graph",
    "radius_graph",
    "DualNeighbourhoodConv",
    "EdgeConditionedConv",
    "FilterNet",
    "PoolResult",
    "PoolingLayer",
    "group_points",
    "nearest_voxel_pool",
    "voxel_pool",
    "FusedCloud",
    "FusionStage",
    "fuse",
    "fused_to_cloud",
    "late_fuse",
    "lift_feature_map",
    "AugmentationConfig",
    "augment",
    "BranchConfig",
    "ClassifierHead",
    "FusionClassifier",
    "GeometricBranch",
    "GeometricClassifier",
    "Sample",
    "TextureClassifier",
    "classify",
    "desk_branch_config",
    "MetricsReport",
    "metrics_from_predictions",
    "SynthSpec",
    "synth_dataset",
    "TrainConfig",
    "captures_to_samples",
    "evaluate",
    "fit",
]
