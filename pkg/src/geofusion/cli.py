"""Command-line entry point.

Subcommands: synth-gen, preprocess, dump-graph, train-3d, train-fusion,
eval, grad-check, bench-pool. Every run that writes artifacts also writes
a manifest.json (resolved config, seed, versions) sufficient to re-run it
bit-identically. Exit codes: 0 success, 2 usage, 3 data error, 4 numeric
check failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .checks import CHECKS
from .config import ExperimentConfig, config_to_dict, load_config
from .data.capture import list_captures, load_capture, save_capture
from .data.camera import simplified_hha
from .data.ply import read_ply, write_ply
from .errors import DataError, GeofusionError, NumericCheckError
from .fusion import lift_feature_map
from .graph import AttributeConfig, edge_attributes, edge_list_lines, knn_graph, radius_graph
from .metrics import MetricsReport
from .model import (
    FusedSample,
    FusionClassifier,
    GeometricClassifier,
    Sample,
)
from .nn.checkpoint import read_container, write_container
from .pooling import nearest_voxel_pool, voxel_pool
from .synth import synth_dataset
from .train import captures_to_samples, evaluate_with_loss, fit


def _write_manifest(out_dir: Path, command: str, cfg: ExperimentConfig | None,
                    extra: dict | None = None) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "config": None if cfg is None else config_to_dict(cfg),
        "versions": {
            "geofusion": __version__,
            "numpy": np.__version__,
            "python": ".".join(str(v) for v in sys.version_info[:3]),
            "kernel_backend": kernels.backend(),
        },
    }
    if extra:
        manifest.update(extra)
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )


def _config_from_args(args) -> ExperimentConfig:
    overrides: dict = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        overrides.setdefault("train", {})["workers"] = args.workers
    if getattr(args, "epochs", None) is not None:
        overrides.setdefault("train", {})["epochs"] = args.epochs
    return load_config(getattr(args, "config", None), getattr(args, "preset", None), overrides)


def cmd_synth_gen(args) -> int:
    cfg = _config_from_args(args)
    train, test = synth_dataset(cfg.synth, cfg.seed)
    out = Path(args.out)
    for split, captures in (("train", train), ("test", test)):
        for i, cap in enumerate(captures):
            save_capture(cap, out / split / f"cap_{i:05d}")
    _write_manifest(out, "synth-gen", cfg,
                    {"n_train": len(train), "n_test": len(test)})
    print(f"wrote {len(train)} train / {len(test)} test captures to {out}")
    return 0


def cmd_preprocess(args) -> int:
    cfg = _config_from_args(args)
    stride = args.stride if args.stride is not None else cfg.stride
    capture = load_capture(args.capture)
    cloud = simplified_hha(capture.depth, capture.intrinsics, stride)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_ply(cloud, out)
    print(f"wrote {cloud.n_points} points with {cloud.feature_dim} features to {out}")
    return 0


def cmd_dump_graph(args) -> int:
    cloud = read_ply(args.cloud)
    if args.space == "feature":
        if cloud.features is None:
            raise DataError("cloud has no features for a feature-space graph")
        vectors = cloud.features
    else:
        vectors = cloud.positions
    if args.radius is not None:
        graph = radius_graph(vectors, args.radius, space=args.space)
    else:
        graph = knn_graph(vectors, args.k, space=args.space)
    attrs = None
    if args.pos_attr != "none" or args.feat_attr != "none":
        config = AttributeConfig(positional=args.pos_attr, feature=args.feat_attr)
        attrs = edge_attributes(graph, cloud.positions, cloud.features, config)
    lines = edge_list_lines(graph, attrs)
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n")
    else:
        print("\n".join(lines))
    return 0


def cmd_train_3d(args) -> int:
    cfg = _config_from_args(args)
    train_caps = [load_capture(p) for p in list_captures(Path(args.data) / "train")]
    test_caps = [load_capture(p) for p in list_captures(Path(args.data) / "test")]
    train_samples = captures_to_samples(train_caps, cfg.stride)
    test_samples = captures_to_samples(test_caps, cfg.stride)
    n_classes = max(s.label for s in train_samples + test_samples) + 1

    model = GeometricClassifier(cfg.branch, n_classes,
                                head_dropout=cfg.head_dropout, seed=cfg.seed)
    out = Path(args.out)
    result = fit(model, train_samples, test_samples, n_classes, cfg.train,
                 seed=cfg.seed, aug_cfg=cfg.augment, out_dir=out,
                 verbose=not args.quiet)
    _write_manifest(out, "train-3d", cfg, {"n_classes": n_classes,
                                           "best_epoch": result.best_epoch,
                                           "best_test_mean_acc": result.best_test_acc})
    print(f"best test mean class accuracy {result.best_test_acc:.4f} "
          f"at epoch {result.best_epoch}")
    return 0


def _fused_samples(captures, cfg: ExperimentConfig, branch_state) -> list[FusedSample]:
    n_classes = max(cap.label for cap in captures) + 1
    model = GeometricClassifier(cfg.branch, n_classes,
                                head_dropout=cfg.head_dropout, seed=cfg.seed)
    model.store.load_state_dict(branch_state)
    samples = []
    for cap in captures:
        cloud = simplified_hha(cap.depth, cap.intrinsics, cfg.stride)
        geom = model.embed(cloud)
        tex = lift_feature_map(cap)
        samples.append(FusedSample(geom=geom, tex=tex, label=cap.label))
    return samples


def cmd_train_fusion(args) -> int:
    cfg = _config_from_args(args)
    branch_state = read_container(args.branch_ckpt)
    train_caps = [load_capture(p) for p in list_captures(Path(args.data) / "train")]
    test_caps = [load_capture(p) for p in list_captures(Path(args.data) / "test")]
    n_classes = max(cap.label for cap in train_caps + test_caps) + 1
    train_samples = _fused_samples(train_caps, cfg, branch_state)
    test_samples = _fused_samples(test_caps, cfg, branch_state)

    d_geom = train_samples[0].geom.feature_dim
    d_tex = train_samples[0].tex.feature_dim
    model = FusionClassifier(d_geom, d_tex, n_classes, d_fused=cfg.fusion.d_fused,
                             r=cfg.fusion.radius, layout=cfg.fusion.layout,
                             head_dropout=cfg.fusion.dropout, seed=cfg.seed)
    import dataclasses

    train_cfg = dataclasses.replace(cfg.train, epochs=cfg.fusion.epochs, augment=False)
    out = Path(args.out)
    result = fit(model, train_samples, test_samples, n_classes, train_cfg,
                 seed=cfg.seed, out_dir=out, verbose=not args.quiet)
    _write_manifest(out, "train-fusion", cfg, {"n_classes": n_classes,
                                               "best_epoch": result.best_epoch,
                                               "best_test_mean_acc": result.best_test_acc})
    print(f"best test mean class accuracy {result.best_test_acc:.4f} "
          f"at epoch {result.best_epoch}")
    return 0


def cmd_eval(args) -> int:
    cfg = _config_from_args(args)
    test_caps = [load_capture(p) for p in list_captures(Path(args.data) / "test")]
    test_samples = captures_to_samples(test_caps, cfg.stride)
    n_classes = max(s.label for s in test_samples) + 1
    model = GeometricClassifier(cfg.branch, n_classes,
                                head_dropout=cfg.head_dropout, seed=cfg.seed)
    model.store.load_state_dict(read_container(args.ckpt))
    metrics, loss = evaluate_with_loss(model, test_samples, n_classes)
    print(f"loss {loss:.4f}  {metrics}")
    for c, recall in enumerate(metrics.per_class_recall):
        print(f"  class {c}: recall {recall:.4f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "eval.txt").write_text(
            f"{loss:.17g} {metrics.mean_class_accuracy:.17g}\n"
        )
        _write_manifest(out, "eval", cfg, {"mean_class_accuracy": metrics.mean_class_accuracy})
    return 0


def cmd_grad_check(args) -> int:
    failures = 0
    for name, fn in CHECKS.items():
        worst = max(fn(args.seed + s).max_rel_error for s in range(args.seeds))
        status = "ok" if worst <= 1e-5 else "FAIL"
        print(f"{name:26s} max rel error {worst:.3e}  {status}")
        failures += status == "FAIL"
    if failures:
        raise NumericCheckError(f"{failures} gradient check(s) exceeded 1e-5")
    return 0


def cmd_bench_pool(args) -> int:
    cloud = read_ply(args.cloud)
    print(f"{cloud.n_points} points, kernel backend: {kernels.backend()}")
    for name, pool in (("VP", voxel_pool), ("NVP", nearest_voxel_pool)):
        start = time.perf_counter()
        result = pool(cloud, args.r, args.aggr)
        elapsed = time.perf_counter() - start
        centroids = result.cloud.positions[result.assignment]
        mean_dist = float(np.linalg.norm(cloud.positions - centroids, axis=1).mean())
        print(
            f"{name}: {result.n_groups} groups, "
            f"mean point-to-centroid distance {mean_dist:.6f} m, "
            f"{elapsed * 1e3:.2f} ms"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geofusion",
        description="Point-cloud graph convolution, voxel pooling, and 2D-3D fusion.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", help="YAML experiment config")
        p.add_argument("--preset", choices=("paper", "desk"), help="base preset")
        p.add_argument("--seed", type=int, help="override the experiment seed")
        p.add_argument("--workers", type=int, help="data-loading workers")

    p = sub.add_parser("synth-gen", help="generate a synthetic capture dataset")
    common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth_gen)

    p = sub.add_parser("preprocess", help="capture directory -> feature PLY")
    common(p)
    p.add_argument("--capture", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stride", type=int, help="depth decimation stride")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("dump-graph", help="emit an edge-list dump of a cloud's graph")
    p.add_argument("--cloud", required=True)
    p.add_argument("--space", choices=("euclidean", "feature"), default="euclidean")
    p.add_argument("--k", type=int, default=9)
    p.add_argument("--radius", type=float)
    p.add_argument("--pos-attr", choices=("none", "cartesian", "spherical"),
                   default="spherical")
    p.add_argument("--feat-attr", choices=("none", "offset", "l2"), default="none")
    p.add_argument("--out")
    p.set_defaults(func=cmd_dump_graph)

    p = sub.add_parser("train-3d", help="train the geometric branch + classifier")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, help="override epoch count")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train_3d)

    p = sub.add_parser("train-fusion", help="train the fusion stage on frozen branches")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--branch-ckpt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, help="override epoch count")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train_fusion)

    p = sub.add_parser("eval", help="evaluate a geometric checkpoint")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grad-check", help="finite-difference gradient suite")
    p.add_argument("--preset", choices=("paper", "desk"), default="desk")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("bench-pool", help="compare voxel vs nearest-voxel pooling")
    p.add_argument("--cloud", required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--aggr", choices=("average", "maximum"), default="average")
    p.set_defaults(func=cmd_bench_pool)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericCheckError as exc:
        print(f"numeric check failed: {exc}", file=sys.stderr)
        return 4
    except (GeofusionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
