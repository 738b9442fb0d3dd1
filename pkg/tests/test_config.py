"""Preset / file / override precedence of the experiment config."""

import pytest

from geofusion.config import config_to_dict, load_config, preset_config
from geofusion.errors import DataError


def test_paper_preset_defaults():
    cfg = preset_config("paper")
    assert cfg.branch.widths == (64, 128, 256, 512, 512)
    assert cfg.branch.pool_radii == (0.05, 0.08, 0.12, 0.24)
    assert cfg.branch.k == 9
    assert cfg.branch.filter_hidden == 128
    assert cfg.train.epochs == 200 and cfg.train.batch_size == 32
    assert cfg.train.lr == 1e-3 and cfg.train.weight_decay == 1e-4
    assert cfg.stride == 8
    assert cfg.fusion.radius == 0.24 and cfg.fusion.dropout == 0.5
    assert cfg.head_dropout == 0.2


def test_desk_preset_is_small():
    cfg = preset_config("desk")
    assert len(cfg.branch.widths) == 3
    assert cfg.train.epochs <= 50


def test_unknown_preset():
    with pytest.raises(DataError):
        preset_config("huge")


def test_file_overrides_preset(tmp_path):
    path = tmp_path / "exp.yaml"
    path.write_text("seed: 9\nbranch:\n  k: 5\ntrain:\n  epochs: 3\n")
    cfg = load_config(path, preset="desk")
    assert cfg.seed == 9
    assert cfg.branch.k == 5
    assert cfg.train.epochs == 3
    assert cfg.branch.widths == preset_config("desk").branch.widths


def test_overrides_beat_file(tmp_path):
    path = tmp_path / "exp.yaml"
    path.write_text("seed: 9\n")
    cfg = load_config(path, overrides={"seed": 13, "train": {"workers": 4}})
    assert cfg.seed == 13
    assert cfg.train.workers == 4


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "exp.yaml"
    path.write_text("optimizer: {}\n")
    with pytest.raises(DataError, match="optimizer"):
        load_config(path)


def test_preset_key_in_file(tmp_path):
    path = tmp_path / "exp.yaml"
    path.write_text("preset: paper\n")
    assert load_config(path).branch.k == 9
    assert load_config(path).train.epochs == 200


def test_round_trip_through_dict():
    cfg = preset_config("desk")
    d = config_to_dict(cfg)
    assert d["branch"]["widths"] == list(cfg.branch.widths)
    assert d["train"]["lr"] == cfg.train.lr
    assert isinstance(d["augment"]["rotation_range"], list)
