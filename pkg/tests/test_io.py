"""Back-projection, HHA-style features, PLY and capture I/O."""

import numpy as np
import pytest
from PIL import Image

from geofusion.data import (
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
from geofusion.data.capture import save_capture
from geofusion.errors import (
    BehindCameraError,
    DataError,
    EmptyCaptureError,
    FormatError,
)
from geofusion.synth import SynthSpec, synth_dataset

K = CameraIntrinsics(fx=500.0, fy=500.0, cx=320.0, cy=240.0)


def _flat_depth(width=640, height=480, mm=2000):
    return DepthImage(values=np.full((height, width), mm, dtype=np.uint16))


class TestBackproject:
    def test_principal_point(self):
        depth = _flat_depth()
        cloud = backproject(depth, K)
        # pixel at the principal point maps to the optical axis
        idx = 240 * 640 + 320
        np.testing.assert_allclose(cloud.positions[idx], [0.0, 0.0, 2.0], atol=1e-12)

    def test_known_pixel(self):
        depth = DepthImage(values=np.zeros((480, 840), dtype=np.uint16))
        depth.values[240, 820] = 1000
        cloud = backproject(depth, K)
        np.testing.assert_allclose(cloud.positions, [[1.0, 0.0, 1.0]], atol=1e-12)

    def test_count_equals_valid_sampled_pixels(self, rng):
        values = (rng.random((40, 60)) > 0.3).astype(np.uint16) * 1500
        depth = DepthImage(values=values)
        cloud = backproject(depth, K, stride=4)
        assert cloud.n_points == int((values[::4, ::4] > 0).sum())

    def test_all_invalid_raises(self):
        with pytest.raises(EmptyCaptureError):
            backproject(DepthImage(values=np.zeros((10, 10), dtype=np.uint16)), K)

    def test_stride_must_be_positive(self):
        with pytest.raises(ValueError):
            backproject(_flat_depth(), K, stride=0)


class TestProjectToPixel:
    def test_optical_axis(self):
        assert project_to_pixel((0.0, 0.0, 3.7), K) == pytest.approx((320.0, 240.0))

    def test_known_point(self):
        assert project_to_pixel((1.0, 0.0, 1.0), K) == pytest.approx((820.0, 240.0))

    def test_round_trip_with_backproject(self, rng):
        depth = _flat_depth(64, 48, 1234)
        cloud = backproject(depth, K, stride=2)
        uv = project_to_pixel(cloud.positions, K)
        vs, us = np.mgrid[0:48:2, 0:64:2]
        np.testing.assert_allclose(uv[:, 0], us.ravel(), atol=1e-9)
        np.testing.assert_allclose(uv[:, 1], vs.ravel(), atol=1e-9)

    def test_behind_camera(self):
        with pytest.raises(BehindCameraError):
            project_to_pixel((0.0, 0.0, -1.0), K)
        with pytest.raises(BehindCameraError):
            project_to_pixel((0.0, 0.0, 0.0), K)


class TestSimplifiedHha:
    def test_channels_in_unit_range(self, rng):
        values = (1000 + 2000 * rng.random((60, 80))).astype(np.uint16)
        cloud = simplified_hha(DepthImage(values=values), K, stride=2)
        assert cloud.features.shape == (cloud.n_points, 3)
        assert cloud.features.min() >= 0.0 and cloud.features.max() <= 1.0

    def test_constant_depth_wall_constant_disparity(self):
        cloud = simplified_hha(_flat_depth(), K, stride=8)
        assert np.all(cloud.features[:, 0] == cloud.features[0, 0])

    def test_lowest_point_has_zero_height(self, rng):
        values = (1000 + 2000 * rng.random((64, 64))).astype(np.uint16)
        cloud = simplified_hha(DepthImage(values=values), K, stride=4)
        lowest = np.argmax(cloud.positions[:, 1])  # +y is down
        assert cloud.features[lowest, 1] == 0.0

    def test_height_translation_invariant_along_x_z(self, rng):
        # moving the same geometry sideways or in depth leaves heights alone
        values = (1000 + 500 * rng.random((32, 32))).astype(np.uint16)
        base = simplified_hha(DepthImage(values=values), K, stride=2)
        ka = CameraIntrinsics(fx=K.fx, fy=K.fy, cx=K.cx + 40.0, cy=K.cy)
        shifted = simplified_hha(DepthImage(values=values), ka, stride=2)
        np.testing.assert_allclose(shifted.features[:, 1], base.features[:, 1], atol=1e-12)

    def test_floor_plane_angle_near_zero(self):
        # analytic floor: y = h in camera coordinates (y down) => depth
        # z = h*fy/(v-cy) for pixels below the principal point
        h, w = 120, 160
        k = CameraIntrinsics(fx=100.0, fy=100.0, cx=w / 2, cy=h / 2)
        floor_y = 1.0
        values = np.zeros((h, w), dtype=np.uint16)
        vs = np.arange(h)
        for v in vs:
            if v - k.cy > 4:  # keep away from the horizon
                z = floor_y * k.fy / (v - k.cy)
                values[v, :] = int(round(z * 1000))
        cloud = simplified_hha(DepthImage(values=values), k, stride=2)
        # the analytic normal equals the up direction: angle channel ~ 0
        interior = cloud.features[:, 2]
        assert np.quantile(interior, 0.95) <= 5.0 / 255.0

    def test_wall_angle_near_quarter_turn(self):
        cloud = simplified_hha(_flat_depth(), K, stride=8)
        # frontal wall normal is perpendicular to the up direction
        inner = cloud.features[:, 2]
        np.testing.assert_allclose(inner, 0.5, atol=5.0 / 255.0)


class TestPly:
    def test_binary_round_trip_bit_exact(self, tmp_path, rng):
        cloud = PointCloud(positions=rng.normal(size=(17, 3)),
                           features=rng.normal(size=(17, 5)))
        path = tmp_path / "c.ply"
        write_ply(cloud, path)
        loaded = read_ply(path)
        assert np.array_equal(loaded.positions, cloud.positions)
        assert np.array_equal(loaded.features, cloud.features)

    def test_positions_only_round_trip(self, tmp_path, rng):
        cloud = PointCloud(positions=rng.normal(size=(5, 3)))
        path = tmp_path / "p.ply"
        write_ply(cloud, path)
        loaded = read_ply(path)
        assert loaded.features is None
        assert np.array_equal(loaded.positions, cloud.positions)

    def test_external_ascii_file(self, tmp_path):
        text = "\n".join(
            [
                "ply",
                "format ascii 1.0",
                "comment made by hand",
                "element vertex 2",
                "property float x",
                "property float y",
                "property float z",
                "property float nx",
                "property float ny",
                "property float nz",
                "end_header",
                "0.5 1.5 2.5 0 0 1",
                "-1 0 3 0.5 0.5 0",
            ]
        )
        path = tmp_path / "ext.ply"
        path.write_text(text + "\n")
        cloud = read_ply(path)
        assert cloud.positions.shape == (2, 3)
        assert cloud.features.shape == (2, 3)
        np.testing.assert_allclose(cloud.positions[0], [0.5, 1.5, 2.5])
        np.testing.assert_allclose(cloud.features[1], [0.5, 0.5, 0.0])

    def test_ascii_write_read(self, tmp_path, rng):
        cloud = PointCloud(positions=rng.normal(size=(4, 3)),
                           features=rng.normal(size=(4, 2)))
        path = tmp_path / "a.ply"
        write_ply(cloud, path, binary=False)
        loaded = read_ply(path)
        np.testing.assert_allclose(loaded.positions, cloud.positions, rtol=1e-15)
        np.testing.assert_allclose(loaded.features, cloud.features, rtol=1e-15)

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "bad.ply"
        path.write_bytes(b"not a ply at all")
        with pytest.raises(FormatError):
            read_ply(path)

    def test_truncated_binary(self, tmp_path, rng):
        cloud = PointCloud(positions=rng.normal(size=(10, 3)))
        path = tmp_path / "t.ply"
        write_ply(cloud, path)
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(FormatError):
            read_ply(path)


@pytest.fixture(scope="module")
def capture_dir(tmp_path_factory):
    spec = SynthSpec(n_train=1, n_test=0)
    train, _ = synth_dataset(spec, seed=3)
    d = tmp_path_factory.mktemp("cap") / "cap_00000"
    save_capture(train[0], d)
    return d


class TestCapture:
    def test_fixture_loads_with_expected_dims(self, capture_dir):
        cap = load_capture(capture_dir)
        assert cap.depth.values.shape == (120, 160)
        assert cap.feature_map.shape == (15, 20, 4)
        assert cap.feature_stride == 8
        assert cap.label == 0
        assert cap.intrinsics.fx == 100.0

    def test_round_trip_preserves_depth(self, capture_dir, tmp_path):
        cap = load_capture(capture_dir)
        save_capture(cap, tmp_path / "again")
        cap2 = load_capture(tmp_path / "again")
        assert np.array_equal(cap.depth.values, cap2.depth.values)
        np.testing.assert_array_equal(cap.feature_map, cap2.feature_map)

    def test_missing_depth_named(self, capture_dir, tmp_path):
        import shutil

        broken = tmp_path / "broken"
        shutil.copytree(capture_dir, broken)
        (broken / "depth.png").unlink()
        with pytest.raises(DataError, match="depth.png"):
            load_capture(broken)

    def test_eight_bit_depth_rejected(self, capture_dir, tmp_path):
        import shutil

        broken = tmp_path / "eightbit"
        shutil.copytree(capture_dir, broken)
        Image.fromarray(np.zeros((4, 4), dtype=np.uint8)).save(broken / "depth.png")
        with pytest.raises(FormatError):
            load_capture(broken)
