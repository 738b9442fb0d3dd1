"""Branch assembly, classifier head, full-model plumbing."""

import numpy as np
import pytest

from geofusion.checks import check_classifier_head
from geofusion.data.cloud import PointCloud
from geofusion.model import (
    BranchConfig,
    ClassifierHead,
    GeometricBranch,
    GeometricClassifier,
    Sample,
    classify,
    desk_branch_config,
)
from geofusion.nn.layers import softmax

from conftest import random_cloud


def _branch_cfg():
    return BranchConfig(
        widths=(4, 8, 8),
        pool_radii=(0.6, 1.2),
        k=4,
        filter_hidden=8,
        euclid_radii=(0.6, 1.2, 2.4),
    )


class TestBranchConfig:
    def test_paper_default_shape(self):
        cfg = BranchConfig()
        assert len(cfg.widths) == 5 and len(cfg.pool_radii) == 4
        assert cfg.pool_radii == (0.05, 0.08, 0.12, 0.24)
        assert cfg.k == 9 and cfg.aggregation == "average" and cfg.clamp

    def test_desk_preset_shape(self):
        cfg = desk_branch_config()
        assert len(cfg.widths) == 3 and len(cfg.pool_radii) == 2

    def test_validation(self):
        with pytest.raises(ValueError):
            BranchConfig(widths=(4, 8), pool_radii=(0.2, 0.1))
        with pytest.raises(ValueError):
            BranchConfig(widths=(4, 8), pool_radii=(0.2, 0.3))
        with pytest.raises(ValueError):
            BranchConfig(widths=(4,), pool_radii=(), k=0)


class TestGeometricBranch:
    def test_node_counts_strictly_decrease_on_spread_cloud(self, rng):
        branch = GeometricBranch(_branch_cfg(), in_features=3,
                                 rng=np.random.default_rng(0))
        cloud = PointCloud(positions=rng.uniform(-2, 2, size=(512, 3)),
                           features=rng.normal(size=(512, 3)))
        _, cache = branch.forward(cloud)
        counts = cache["node_counts"]
        assert len(counts) == 3
        assert counts[0] == 512
        assert counts[0] > counts[1] > counts[2]

    def test_single_point_survives_all_stages(self):
        branch = GeometricBranch(_branch_cfg(), rng=np.random.default_rng(0))
        cloud = PointCloud(positions=np.zeros((1, 3)), features=np.ones((1, 3)))
        out, cache = branch.forward(cloud)
        assert out.n_points == 1
        assert out.features.shape == (1, 8)
        assert cache["node_counts"] == [1, 1, 1]

    def test_deterministic_forward(self, rng):
        branch = GeometricBranch(_branch_cfg(), rng=np.random.default_rng(5))
        cloud = random_cloud(rng, n=64)
        a, _ = branch.forward(cloud)
        b, _ = branch.forward(cloud)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.positions, b.positions)

    def test_radius_policy_runs(self, rng):
        cfg = BranchConfig(
            widths=(4, 8), pool_radii=(0.6,), k=4, filter_hidden=8,
            euclid_policy="radius", euclid_radii=(0.7, 1.4),
        )
        branch = GeometricBranch(cfg, rng=np.random.default_rng(0))
        out, _ = branch.forward(random_cloud(rng, n=40))
        assert out.features.shape[1] == 8


class TestClassifierHead:
    def test_bias_initialization_matches_prior(self):
        for c in (2, 3, 10, 19):
            head = ClassifierHead(8, c)
            sig = 1.0 / (1.0 + np.exp(-head.fc.bias.value))
            np.testing.assert_allclose(sig, 1.0 / c, atol=1e-12)

    def test_zero_weights_give_uniform_softmax(self, rng):
        head = ClassifierHead(4, 3)
        head.fc.weight.value[:] = 0.0
        feats = rng.normal(size=(6, 4))
        batch = np.array([0, 0, 1, 1, 2, 2])
        logits = classify(head, feats, batch)
        np.testing.assert_allclose(logits, logits[0, 0], atol=1e-12)
        np.testing.assert_allclose(softmax(logits), 1.0 / 3.0, atol=1e-12)

    def test_eval_mode_is_repeatable(self, rng):
        head = ClassifierHead(4, 3, dropout_p=0.5, rng=rng)
        feats = rng.normal(size=(5, 4))
        batch = np.array([0, 0, 0, 1, 1])
        a = classify(head, feats, batch)
        b = classify(head, feats, batch)
        np.testing.assert_array_equal(a, b)

    def test_train_mode_uses_dropout(self, rng):
        head = ClassifierHead(16, 3, dropout_p=0.5, rng=rng)
        feats = rng.normal(size=(4, 16))
        batch = np.array([0, 0, 1, 1])
        a = classify(head, feats, batch, rng=np.random.default_rng(1), train=True)
        b = classify(head, feats, batch, rng=np.random.default_rng(2), train=True)
        assert not np.array_equal(a, b)

    def test_gradients(self):
        for seed in range(3):
            assert check_classifier_head(seed).max_rel_error <= 1e-5


class TestGeometricClassifier:
    def test_forward_batch_shapes_and_param_registry(self, rng):
        model = GeometricClassifier(_branch_cfg(), n_classes=3, seed=0)
        samples = [Sample(cloud=random_cloud(rng, n=30), label=i % 3) for i in range(4)]
        logits, cache = model.forward_batch(samples)
        assert logits.shape == (4, 3)
        names = model.store.names()
        assert any(name.startswith("branch.conv0.euclid") for name in names)
        assert any(name.startswith("head.fc") for name in names)

    def test_backward_populates_gradients(self, rng):
        model = GeometricClassifier(_branch_cfg(), n_classes=2, seed=0)
        samples = [Sample(cloud=random_cloud(rng, n=25), label=i % 2) for i in range(3)]
        logits, cache = model.forward_batch(samples)
        model.store.zero_grad()
        model.backward(cache, np.ones_like(logits))
        nonzero = sum(bool(np.abs(p.grad).sum() > 0) for _, p in model.store.items())
        assert nonzero > len(model.store.names()) * 0.5

    def test_same_seed_same_init(self):
        a = GeometricClassifier(_branch_cfg(), n_classes=3, seed=4)
        b = GeometricClassifier(_branch_cfg(), n_classes=3, seed=4)
        for (na, pa), (nb, pb) in zip(a.store.items(), b.store.items()):
            assert na == nb
            np.testing.assert_array_equal(pa.value, pb.value)
