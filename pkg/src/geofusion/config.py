"""Experiment configuration: presets, YAML files, flag overrides.

Precedence (lowest to highest): preset defaults, config file, explicit
overrides. Unknown keys in a file raise, which catches typos early.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .augment import AugmentationConfig
from .errors import DataError
from .model import BranchConfig, desk_branch_config
from .synth import SynthSpec
from .train import TrainConfig

PRESETS = ("paper", "desk")


@dataclass(frozen=True)
class FusionConfig:
    d_fused: int = 512
    radius: float = 0.24
    layout: str = "geometric-first"
    dropout: float = 0.5
    epochs: int = 20
    mode: str = "geometric"  # "geometric" | "late"


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    preset: str = "desk"
    stride: int = 8  # depth decimation at ingestion
    head_dropout: float = 0.2
    branch: BranchConfig = field(default_factory=BranchConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    augment: AugmentationConfig = field(default_factory=AugmentationConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    synth: SynthSpec = field(default_factory=SynthSpec)


def preset_config(preset: str) -> ExperimentConfig:
    if preset == "paper":
        return ExperimentConfig(
            preset="paper",
            stride=8,
            branch=BranchConfig(),
            train=TrainConfig(epochs=200, batch_size=32, lr=1e-3,
                              momentum=0.9, weight_decay=1e-4),
            fusion=FusionConfig(),
        )
    if preset == "desk":
        return ExperimentConfig(
            preset="desk",
            stride=6,
            branch=desk_branch_config(),
            train=TrainConfig(epochs=30, batch_size=16, lr=0.1,
                              momentum=0.9, weight_decay=1e-4,
                              lr_decay=0.2, lr_decay_at=0.6),
            fusion=FusionConfig(d_fused=16, epochs=20),
            synth=SynthSpec(),
        )
    raise DataError(f"unknown preset {preset!r}; choose from {PRESETS}")


def _merge_dataclass(obj, values: dict, path: str):
    """Replace fields of a (possibly nested) frozen dataclass from a dict."""
    known = {f.name: f for f in dataclasses.fields(obj)}
    updates = {}
    for key, val in values.items():
        if key not in known:
            raise DataError(f"unknown config key {path}{key!r}")
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current) and isinstance(val, dict):
            updates[key] = _merge_dataclass(current, val, f"{path}{key}.")
        else:
            if isinstance(current, tuple) and isinstance(val, list):
                val = tuple(val)
            updates[key] = val
    return dataclasses.replace(obj, **updates)


def load_config(path=None, preset: str | None = None,
                overrides: dict | None = None) -> ExperimentConfig:
    file_values: dict = {}
    if path is not None:
        text = Path(path).read_text()
        loaded = yaml.safe_load(text) or {}
        if not isinstance(loaded, dict):
            raise DataError(f"{path}: config must be a mapping")
        file_values = loaded
    chosen = preset or file_values.get("preset") or "desk"
    cfg = preset_config(chosen)
    file_values.pop("preset", None)
    cfg = _merge_dataclass(cfg, file_values, "")
    if overrides:
        cfg = _merge_dataclass(cfg, overrides, "")
    return cfg


def config_to_dict(cfg) -> dict:
    """Plain nested dict (tuples as lists) for manifests and YAML dumps."""
    if dataclasses.is_dataclass(cfg) and not isinstance(cfg, type):
        return {f.name: config_to_dict(getattr(cfg, f.name)) for f in dataclasses.fields(cfg)}
    if isinstance(cfg, tuple):
        return [config_to_dict(v) for v in cfg]
    if isinstance(cfg, (list, dict, str, int, float, bool)) or cfg is None:
        return cfg
    return str(cfg)
