"""Branch assembly and classification heads.

The geometric branch alternates dual-neighbourhood convolutions with
nearest-voxel poolings (five convolutions / four poolings in the full
preset; three / two in the desk preset). The classifier is a global
average pooling, dropout, and one fully connected layer whose bias is
initialized so each class starts at probability 1/C.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .conv import DualNeighbourhoodConv
from .data.cloud import PointCloud
from .errors import DimensionError
from .fusion import FusionStage
from .graph import AttributeConfig
from .nn.layers import (
    Dropout,
    Linear,
    global_average_pool,
    global_average_pool_backward,
    relu,
    relu_backward,
)
from .nn.params import ParamStore
from .pooling import PoolingLayer


@dataclass(frozen=True)
class BranchConfig:
    """Hyperparameters of the geometric branch."""

    widths: tuple[int, ...] = (64, 128, 256, 512, 512)
    pool_radii: tuple[float, ...] = (0.05, 0.08, 0.12, 0.24)
    k: int = 9
    positional_attr: str = "spherical"
    feature_attr: str = "offset"
    aggregation: str = "average"
    clamp: bool = True
    filter_hidden: int = 128
    euclid_policy: str = "knn"
    euclid_radii: tuple[float, ...] = (0.05, 0.08, 0.12, 0.24, 0.48)
    pool_method: str = "nvp"
    pool_aggr: str = "average"
    post_activation: bool = True

    def __post_init__(self):
        if len(self.widths) < 1 or any(w < 1 for w in self.widths):
            raise ValueError("widths must be positive")
        if len(self.pool_radii) != len(self.widths) - 1:
            raise ValueError("need one pooling radius between consecutive conv layers")
        if any(b <= a for a, b in zip(self.pool_radii, self.pool_radii[1:])):
            raise ValueError("pooling radii must be strictly increasing")
        if any(r <= 0 for r in self.pool_radii):
            raise ValueError("pooling radii must be positive")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.euclid_policy not in ("knn", "radius"):
            raise ValueError("euclid_policy must be 'knn' or 'radius'")
        if self.euclid_policy == "radius" and len(self.euclid_radii) < len(self.widths):
            raise ValueError("radius policy needs one radius per conv layer")

    @property
    def attr_config(self) -> AttributeConfig:
        return AttributeConfig(positional=self.positional_attr, feature=self.feature_attr)


def desk_branch_config() -> BranchConfig:
    """Small preset for CI and the synthetic experiments."""
    return BranchConfig(
        widths=(8, 16, 32),
        pool_radii=(0.35, 0.7),
        k=6,
        filter_hidden=16,
        euclid_radii=(0.35, 0.7, 1.4),
    )


class GeometricBranch:
    """Stack of dual-neighbourhood convolutions with poolings between."""

    def __init__(self, cfg: BranchConfig, in_features: int = 3,
                 rng: np.random.Generator | None = None):
        if rng is None:
            rng = np.random.default_rng(0)
        self.cfg = cfg
        dims = (in_features, *cfg.widths)
        self.convs = []
        for l, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
            radius = cfg.euclid_radii[l] if cfg.euclid_policy == "radius" else None
            self.convs.append(
                DualNeighbourhoodConv(
                    d_in, d_out, cfg.k,
                    attr_config=cfg.attr_config,
                    aggregation=cfg.aggregation,
                    hidden=cfg.filter_hidden,
                    clamp=cfg.clamp,
                    euclid_radius=radius,
                    rng=rng,
                )
            )
        self.pools = [
            PoolingLayer(r, cfg.pool_aggr, cfg.pool_method) for r in cfg.pool_radii
        ]

    @property
    def out_dim(self) -> int:
        return self.cfg.widths[-1]

    def params(self, prefix: str):
        for l, conv in enumerate(self.convs):
            yield from conv.params(f"{prefix}.conv{l}")

    def forward(self, cloud: PointCloud) -> tuple[PointCloud, dict]:
        if cloud.features is None:
            raise DimensionError("branch input cloud needs features")
        positions = cloud.positions
        x = cloud.features
        stages = []
        node_counts = [x.shape[0]]
        for l, conv in enumerate(self.convs):
            n = x.shape[0]
            graphs = conv.build_graphs(positions, x, k=min(self.cfg.k, n))
            out, conv_cache = conv.forward(positions, x, graphs=graphs)
            stage = {"conv": conv_cache, "pre_act": out if self.cfg.post_activation else None}
            x = relu(out) if self.cfg.post_activation else out
            if l < len(self.pools):
                pooled, pool_cache = self.pools[l].forward(PointCloud(positions, x))
                stage["pool"] = pool_cache
                positions = pooled.positions
                x = pooled.features
                node_counts.append(x.shape[0])
            stages.append(stage)
        out_cloud = PointCloud(positions, x, label=cloud.label)
        return out_cloud, {"stages": stages, "node_counts": node_counts}

    def backward(self, cache: dict, grad_features: np.ndarray) -> np.ndarray:
        g = grad_features
        for l in range(len(self.convs) - 1, -1, -1):
            stage = cache["stages"][l]
            if "pool" in stage:
                g = self.pools[l].backward(stage["pool"], g)
            if self.cfg.post_activation:
                g = relu_backward(stage["pre_act"], g)
            g = self.convs[l].backward(stage["conv"], g)
        return g


class ClassifierHead:
    """Global average pooling -> dropout -> FC(n_classes).

    The FC bias starts at -log((1-pi)/pi) with pi = 1/C, i.e. every class
    begins at sigmoid(bias) = 1/C.
    """

    def __init__(self, feat_dim: int, n_classes: int, dropout_p: float = 0.2,
                 rng: np.random.Generator | None = None):
        if n_classes < 2:
            raise ValueError("need at least two classes")
        self.n_classes = n_classes
        self.dropout = Dropout(dropout_p)
        self.fc = Linear(feat_dim, n_classes, rng=rng)
        pi = 1.0 / n_classes
        self.fc.bias.value[:] = -np.log((1.0 - pi) / pi)

    def params(self, prefix: str):
        yield from self.fc.params(f"{prefix}.fc")

    def forward(self, features: np.ndarray, batch: np.ndarray,
                rng: np.random.Generator | None = None, train: bool = False,
                n_samples: int | None = None) -> tuple[np.ndarray, dict]:
        pooled = global_average_pool(features, batch, n_samples)
        dropped, mask = self.dropout.forward(pooled, rng, train)
        logits = self.fc.forward(dropped)
        cache = {"batch": batch, "dropped": dropped, "mask": mask}
        return logits, cache

    def backward(self, cache: dict, grad_logits: np.ndarray) -> np.ndarray:
        g = self.fc.backward(cache["dropped"], grad_logits)
        g = self.dropout.backward(g, cache["mask"])
        return global_average_pool_backward(g, cache["batch"])


def classify(head: ClassifierHead, features: np.ndarray, batch: np.ndarray,
             rng: np.random.Generator | None = None, train: bool = False) -> np.ndarray:
    logits, _ = head.forward(features, batch, rng=rng, train=train)
    return logits


@dataclass
class Sample:
    """One training example: a feature-bearing cloud and its class."""

    cloud: PointCloud
    label: int


class GeometricClassifier:
    """Geometric branch plus classification head, trained end to end."""

    augmentable = True

    def __init__(self, cfg: BranchConfig, n_classes: int, in_features: int = 3,
                 head_dropout: float = 0.2, seed: int = 0):
        rng = np.random.default_rng([seed, 0x6E0DE5])
        self.branch = GeometricBranch(cfg, in_features, rng)
        self.head = ClassifierHead(self.branch.out_dim, n_classes, head_dropout, rng)
        self.store = ParamStore()
        for name, p in self.branch.params("branch"):
            self.store.register(name, p)
        for name, p in self.head.params("head"):
            self.store.register(name, p)

    def forward_batch(self, samples: list[Sample],
                      rng: np.random.Generator | None = None,
                      train: bool = False) -> tuple[np.ndarray, dict]:
        feats = []
        batch = []
        branch_caches = []
        for i, sample in enumerate(samples):
            out_cloud, cache = self.branch.forward(sample.cloud)
            feats.append(out_cloud.features)
            batch.append(np.full(out_cloud.n_points, i, dtype=np.int64))
            branch_caches.append(cache)
        features = np.concatenate(feats, axis=0)
        batch = np.concatenate(batch)
        logits, head_cache = self.head.forward(
            features, batch, rng=rng, train=train, n_samples=len(samples)
        )
        sizes = [f.shape[0] for f in feats]
        return logits, {"branch": branch_caches, "head": head_cache, "sizes": sizes}

    def backward(self, cache: dict, grad_logits: np.ndarray) -> None:
        g = self.head.backward(cache["head"], grad_logits)
        offsets = np.cumsum([0] + cache["sizes"])
        for i, branch_cache in enumerate(cache["branch"]):
            self.branch.backward(branch_cache, g[offsets[i] : offsets[i + 1]])

    def embed(self, cloud: PointCloud) -> PointCloud:
        """Branch features without the head (eval path for the fusion stage)."""
        out_cloud, _ = self.branch.forward(cloud)
        return out_cloud


@dataclass
class FusedSample:
    """Frozen branch output plus the lifted texture cloud for one capture."""

    geom: PointCloud
    tex: PointCloud
    label: int


class FusionClassifier:
    """Trainable fusion stage plus head on top of frozen branch features."""

    augmentable = False

    def __init__(self, d_geom: int, d_tex: int, n_classes: int, d_fused: int = 512,
                 r: float = 0.24, layout: str = "geometric-first",
                 head_dropout: float = 0.5, seed: int = 0):
        rng = np.random.default_rng([seed, 0xF5ED])
        self.stage = FusionStage(d_geom, d_tex, d_fused, r, layout, rng)
        self.head = ClassifierHead(2 * d_fused, n_classes, head_dropout, rng)
        self.store = ParamStore()
        for name, p in self.stage.params("fusion"):
            self.store.register(name, p)
        for name, p in self.head.params("head"):
            self.store.register(name, p)

    def forward_batch(self, samples: list[FusedSample],
                      rng: np.random.Generator | None = None,
                      train: bool = False) -> tuple[np.ndarray, dict]:
        feats = []
        batch = []
        stage_caches = []
        for i, sample in enumerate(samples):
            fused, cache = self.stage.forward(sample.geom, sample.tex)
            feats.append(fused.features)
            batch.append(np.full(fused.n_groups, i, dtype=np.int64))
            stage_caches.append(cache)
        features = np.concatenate(feats, axis=0)
        batch = np.concatenate(batch)
        logits, head_cache = self.head.forward(
            features, batch, rng=rng, train=train, n_samples=len(samples)
        )
        sizes = [f.shape[0] for f in feats]
        return logits, {"stage": stage_caches, "head": head_cache, "sizes": sizes}

    def backward(self, cache: dict, grad_logits: np.ndarray) -> None:
        g = self.head.backward(cache["head"], grad_logits)
        offsets = np.cumsum([0] + cache["sizes"])
        for i, stage_cache in enumerate(cache["stage"]):
            self.stage.backward(stage_cache, g[offsets[i] : offsets[i + 1]])


@dataclass
class TextureSample:
    """Feature-map cells of one capture, flattened to (M, F)."""

    cells: np.ndarray
    label: int


class TextureClassifier:
    """Texture-only baseline: mean over feature-map cells into the head."""

    augmentable = False

    def __init__(self, d_tex: int, n_classes: int, head_dropout: float = 0.5,
                 seed: int = 0):
        rng = np.random.default_rng([seed, 0x7E57])
        self.head = ClassifierHead(d_tex, n_classes, head_dropout, rng)
        self.store = ParamStore()
        for name, p in self.head.params("head"):
            self.store.register(name, p)

    def forward_batch(self, samples: list[TextureSample],
                      rng: np.random.Generator | None = None,
                      train: bool = False) -> tuple[np.ndarray, dict]:
        features = np.concatenate([s.cells for s in samples], axis=0)
        batch = np.concatenate(
            [np.full(s.cells.shape[0], i, dtype=np.int64) for i, s in enumerate(samples)]
        )
        logits, head_cache = self.head.forward(
            features, batch, rng=rng, train=train, n_samples=len(samples)
        )
        return logits, {"head": head_cache}

    def backward(self, cache: dict, grad_logits: np.ndarray) -> None:
        self.head.backward(cache["head"], grad_logits)
