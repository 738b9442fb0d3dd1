"""Feature-map lifting, fusion against the naive reference, late fusion."""

import numpy as np
import pytest

from geofusion.checks import check_fusion_stage
from geofusion.data import CameraIntrinsics, DepthImage, PointCloud, backproject
from geofusion.data.capture import Capture
from geofusion.errors import DataError, DimensionError, EmptyCaptureError
from geofusion.fusion import FusionStage, fuse, late_fuse, lift_feature_map
from geofusion.nn.layers import Linear

from oracles import brute_fuse

K = CameraIntrinsics(fx=100.0, fy=100.0, cx=40.0, cy=30.0)


def _capture(depth_mm, fmap, stride):
    return Capture(
        depth=DepthImage(values=depth_mm.astype(np.uint16)),
        intrinsics=K,
        label=0,
        feature_map=fmap,
        feature_stride=stride,
    )


def _identity_projection(d):
    layer = Linear(d, d, bias=False)
    layer.weight.value[:] = np.eye(d)
    return layer


class TestLiftFeatureMap:
    def test_stride_one_matches_backproject(self, rng):
        depth = (1000 + 1000 * rng.random((60, 80))).astype(np.uint16)
        fmap = rng.normal(size=(60, 80, 2))
        cap = _capture(depth, fmap, stride=1)
        lifted = lift_feature_map(cap)
        reference = backproject(cap.depth, K)
        np.testing.assert_allclose(lifted.positions, reference.positions, atol=1e-12)
        np.testing.assert_allclose(lifted.features, fmap.reshape(-1, 2), atol=1e-15)

    def test_constant_depth_grid_spacing(self, rng):
        z_m = 2.0
        depth = np.full((64, 64), int(z_m * 1000), dtype=np.uint16)
        fmap = rng.normal(size=(8, 8, 1))
        lifted = lift_feature_map(_capture(depth, fmap, stride=8))
        xs = lifted.positions[:, 0].reshape(8, 8)
        spacing = np.diff(xs, axis=1)
        np.testing.assert_allclose(spacing, 8 * z_m / K.fx, atol=1e-12)

    def test_invalid_footprint_dropped(self, rng):
        depth = np.full((16, 16), 1500, dtype=np.uint16)
        depth[0:8, 0:8] = 0  # first cell's whole footprint invalid
        fmap = rng.normal(size=(2, 2, 3))
        lifted = lift_feature_map(_capture(depth, fmap, stride=8))
        assert lifted.n_points == 3

    def test_nearest_valid_depth_in_footprint(self):
        depth = np.zeros((8, 8), dtype=np.uint16)
        depth[3, 5] = 2000  # closest valid pixel to the cell centre (3.5, 3.5)
        depth[0, 0] = 9000
        fmap = np.ones((1, 1, 1))
        lifted = lift_feature_map(_capture(depth, fmap, stride=8))
        np.testing.assert_allclose(lifted.positions[0, 2], 2.0, atol=1e-12)

    def test_no_valid_cells_raises(self):
        depth = np.zeros((8, 8), dtype=np.uint16)
        with pytest.raises(EmptyCaptureError):
            lift_feature_map(_capture(depth, np.ones((1, 1, 1)), stride=8))

    def test_missing_map_raises(self):
        cap = Capture(depth=DepthImage(values=np.ones((4, 4), dtype=np.uint16)),
                      intrinsics=K)
        with pytest.raises(DataError):
            lift_feature_map(cap)


class TestFuse:
    def test_texture_only_group_gets_ones_geometric_half(self, rng):
        geom = PointCloud(positions=np.zeros((1, 3)), features=rng.normal(size=(1, 2)))
        tex = PointCloud(positions=np.array([[5.0, 5.0, 5.0]]),
                         features=rng.normal(size=(1, 3)))
        fused = fuse(geom, tex, _identity_projection(2), Linear(3, 2, bias=False), r=0.1)
        tex_group = int(np.nonzero(fused.has_tex)[0][0])
        assert not fused.has_geom[tex_group]
        np.testing.assert_array_equal(fused.features[tex_group, :2], [1.0, 1.0])

    def test_colocated_singletons_identity_projections(self, rng):
        p = np.array([[0.3, 0.2, 1.0]])
        geom = PointCloud(positions=p, features=rng.normal(size=(1, 2)))
        tex = PointCloud(positions=p.copy(), features=rng.normal(size=(1, 2)))
        fused = fuse(geom, tex, _identity_projection(2), _identity_projection(2), r=0.5)
        assert fused.n_groups == 1
        np.testing.assert_allclose(
            fused.features[0], np.concatenate([geom.features[0], tex.features[0]]),
            atol=1e-15,
        )

    @pytest.mark.parametrize("layout", ["geometric-first", "texture-first"])
    def test_matches_naive_reference(self, layout):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            n_g = int(rng.integers(2, 60))
            n_t = int(rng.integers(2, 60))
            geom = PointCloud(positions=rng.uniform(-1, 1, (n_g, 3)),
                              features=rng.normal(size=(n_g, 3)))
            tex = PointCloud(positions=rng.uniform(-1, 1, (n_t, 3)),
                             features=rng.normal(size=(n_t, 2)))
            pg = Linear(3, 2, bias=False, rng=rng)
            pt = Linear(2, 2, bias=False, rng=rng)
            r = float(rng.uniform(0.2, 0.7))
            fused = fuse(geom, tex, pg, pt, r, layout=layout)
            pos, feats = brute_fuse(
                geom.positions, geom.features, tex.positions, tex.features,
                pg.weight.value, pt.weight.value, r, layout,
            )
            np.testing.assert_allclose(fused.positions, pos, atol=1e-12)
            np.testing.assert_allclose(fused.features, feats, atol=1e-12)

    def test_permutation_invariant_as_a_set(self, rng):
        n = 30
        geom = PointCloud(positions=rng.uniform(-1, 1, (n, 3)),
                          features=rng.normal(size=(n, 2)))
        tex = PointCloud(positions=rng.uniform(-1, 1, (n, 3)),
                         features=rng.normal(size=(n, 2)))
        pg, pt = _identity_projection(2), _identity_projection(2)
        base = fuse(geom, tex, pg, pt, 0.4)
        perm_g, perm_t = rng.permutation(n), rng.permutation(n)
        permuted = fuse(geom.select(perm_g), tex.select(perm_t), pg, pt, 0.4)
        key = lambda f: sorted(map(tuple, np.round(np.hstack([f.positions, f.features]), 9)))
        assert key(base) == key(permuted)

    def test_small_radius_single_modality_groups(self, rng):
        # every point its own superpoint; each misses the other modality
        geom = PointCloud(positions=np.array([[0.0, 0, 0], [10.0, 0, 0]]),
                          features=rng.normal(size=(2, 2)))
        tex = PointCloud(positions=np.array([[5.0, 0, 0]]),
                         features=rng.normal(size=(1, 2)))
        fused = fuse(geom, tex, _identity_projection(2), _identity_projection(2), r=1e-6)
        assert fused.n_groups == 3
        assert fused.has_geom.sum() == 2 and fused.has_tex.sum() == 1
        for g in range(3):
            if fused.has_geom[g]:
                np.testing.assert_array_equal(fused.features[g, 2:], [1.0, 1.0])
            else:
                np.testing.assert_array_equal(fused.features[g, :2], [1.0, 1.0])

    def test_modality_symmetry_of_ones_filling(self, rng):
        feats = rng.normal(size=(1, 2))
        lone_geom = fuse(
            PointCloud(positions=np.zeros((1, 3)), features=feats),
            PointCloud(positions=np.full((1, 3), 9.0), features=rng.normal(size=(1, 2))),
            _identity_projection(2), _identity_projection(2), r=0.1,
        )
        geom_only = int(np.nonzero(lone_geom.has_geom)[0][0])
        tex_only = int(np.nonzero(lone_geom.has_tex)[0][0])
        np.testing.assert_array_equal(lone_geom.features[geom_only, 2:], [1.0, 1.0])
        np.testing.assert_array_equal(lone_geom.features[tex_only, :2], [1.0, 1.0])

    def test_width_mismatch_rejected(self, rng):
        geom = PointCloud(positions=np.zeros((1, 3)), features=rng.normal(size=(1, 2)))
        tex = PointCloud(positions=np.zeros((1, 3)), features=rng.normal(size=(1, 2)))
        with pytest.raises(DimensionError):
            fuse(geom, tex, Linear(2, 3, bias=False), Linear(2, 2, bias=False), 0.1)

    def test_gradients_through_projections(self):
        for seed in range(3):
            assert check_fusion_stage(seed).max_rel_error <= 1e-5

    def test_ones_halves_receive_zero_gradient(self, rng):
        geom = PointCloud(positions=np.zeros((1, 3)), features=rng.normal(size=(1, 2)))
        tex = PointCloud(positions=np.full((1, 3), 8.0), features=rng.normal(size=(1, 2)))
        stage = FusionStage(2, 2, 2, r=0.1, rng=rng)
        fused, cache = stage.forward(geom, tex)
        grad = np.zeros_like(fused.features)
        # push gradient only into the filler halves
        for g in range(fused.n_groups):
            if not fused.has_geom[g]:
                grad[g, :2] = 1.0
            if not fused.has_tex[g]:
                grad[g, 2:] = 1.0
        stage.backward(cache, grad)
        assert np.all(stage.project_geom.weight.grad == 0)
        assert np.all(stage.project_tex.weight.grad == 0)


def test_fused_cloud_ply_round_trip(tmp_path, rng):
    from geofusion.data import read_ply, write_ply
    from geofusion.fusion import fused_to_cloud

    geom = PointCloud(positions=rng.uniform(-1, 1, (10, 3)),
                      features=rng.normal(size=(10, 2)))
    tex = PointCloud(positions=rng.uniform(-1, 1, (6, 3)),
                     features=rng.normal(size=(6, 2)))
    fused = fuse(geom, tex, _identity_projection(2), _identity_projection(2), 0.4)
    cloud = fused_to_cloud(fused)
    assert cloud.feature_dim == 2 * 2 + 2
    path = tmp_path / "fused.ply"
    write_ply(cloud, path)
    loaded = read_ply(path)
    np.testing.assert_array_equal(loaded.features, cloud.features)
    flags = loaded.features[:, -2:]
    assert set(np.unique(flags)).issubset({0.0, 1.0})


class TestLateFuse:
    def test_concat_order(self):
        out = late_fuse(np.array([[1.0, 2.0]]), np.array([[3.0]]))
        np.testing.assert_array_equal(out, [[1.0, 2.0, 3.0]])

    def test_empty_texture_width(self):
        geom = np.array([[1.0, 2.0], [3.0, 4.0]])
        out = late_fuse(geom, np.zeros((2, 0)))
        np.testing.assert_array_equal(out, geom)

    def test_texture_first_layout_mirrors_fuse(self):
        out = late_fuse(np.array([[1.0]]), np.array([[2.0]]), layout="texture-first")
        np.testing.assert_array_equal(out, [[2.0, 1.0]])

    def test_batch_mismatch(self):
        with pytest.raises(DimensionError):
            late_fuse(np.zeros((2, 1)), np.zeros((3, 1)))
