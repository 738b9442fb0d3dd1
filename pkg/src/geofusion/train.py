"""Training loop, evaluation, and dataset preparation.

Determinism contract: every random draw comes from a generator seeded by
(seed, purpose, epoch, index), so two runs with the same seed and config
produce bit-identical parameters and metrics, independent of the worker
count used for augmentation.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .augment import AugmentationConfig, augment
from .data.capture import Capture
from .data.camera import simplified_hha
from .data.cloud import PointCloud
from .errors import DataError
from .metrics import MetricsReport, metrics_from_predictions
from .model import Sample
from .nn.checkpoint import write_container
from .nn.loss import ClassWeights, class_weights_from_counts, weighted_cross_entropy_batch
from .nn.optim import SGDMomentum


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    lr: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 1e-4
    lr_decay: float = 1.0  # multiplier applied after lr_decay_at * epochs
    lr_decay_at: float = 0.7
    augment: bool = True
    workers: int = 1


@dataclass
class FitResult:
    history: list[tuple[int, str, float, float]]  # (epoch, split, loss, mean_acc)
    best_epoch: int
    best_test_acc: float
    best_state: dict[str, np.ndarray]
    final_test: MetricsReport

    def history_lines(self) -> list[str]:
        return [
            f"{epoch} {split} {loss:.17g} {acc:.17g}"
            for epoch, split, loss, acc in self.history
        ]


def captures_to_samples(captures: list[Capture], stride: int) -> list[Sample]:
    """Depth captures -> feature-bearing clouds (the branch input)."""
    samples = []
    for cap in captures:
        if cap.label is None:
            raise DataError("capture has no label")
        cloud = simplified_hha(cap.depth, cap.intrinsics, stride)
        samples.append(Sample(cloud=cloud, label=cap.label))
    return samples


def _augment_task(args):
    cloud, cfg, seed = args
    return augment(cloud, cfg, np.random.default_rng(seed))


def _augment_epoch(samples: list[Sample], cfg: AugmentationConfig, seed: int,
                   epoch: int, pool: ProcessPoolExecutor | None) -> list[Sample]:
    jobs = [(s.cloud, cfg, [seed, 101, epoch, i]) for i, s in enumerate(samples)]
    if pool is None:
        clouds = [_augment_task(j) for j in jobs]
    else:
        clouds = list(pool.map(_augment_task, jobs, chunksize=16))
    return [Sample(cloud=c, label=s.label) for c, s in zip(clouds, samples)]


def _batches(order: np.ndarray, size: int):
    for start in range(0, len(order), size):
        yield order[start : start + size]


def fit(model, train_samples, test_samples, n_classes: int, cfg: TrainConfig,
        seed: int = 0, aug_cfg: AugmentationConfig | None = None,
        out_dir=None, verbose: bool = False,
        class_weights: ClassWeights | None = None) -> FitResult:
    """Train `model` and checkpoint the epoch with the best test mean
    class accuracy. Writes checkpoint_best.pgrf and metrics.txt when
    out_dir is given. Loss weights default to inverse class frequency of
    the training split (which requires every class to be present)."""
    labels = np.array([s.label for s in train_samples], dtype=np.int64)
    if class_weights is None:
        counts = np.bincount(labels, minlength=n_classes)
        class_weights = class_weights_from_counts(counts)
    weights = class_weights
    optimizer = SGDMomentum(cfg.lr, cfg.momentum, cfg.weight_decay)

    do_augment = cfg.augment and getattr(model, "augmentable", False) and aug_cfg is not None
    pool = None
    if do_augment and cfg.workers > 1:
        pool = ProcessPoolExecutor(max_workers=cfg.workers)

    history: list[tuple[int, str, float, float]] = []
    best_epoch = 0
    best_acc = -1.0
    best_state: dict[str, np.ndarray] = {k: v.copy() for k, v in model.store.state_dict().items()}
    final_test = None
    try:
        for epoch in range(1, cfg.epochs + 1):
            if cfg.lr_decay != 1.0 and epoch == int(cfg.lr_decay_at * cfg.epochs) + 1:
                optimizer.lr *= cfg.lr_decay
            if do_augment:
                epoch_samples = _augment_epoch(train_samples, aug_cfg, seed, epoch, pool)
            else:
                epoch_samples = train_samples
            order = np.random.default_rng([seed, 17, epoch]).permutation(len(epoch_samples))

            total_loss = 0.0
            preds = np.empty(len(epoch_samples), dtype=np.int64)
            for bi, batch_idx in enumerate(_batches(order, cfg.batch_size)):
                batch = [epoch_samples[i] for i in batch_idx]
                batch_labels = labels[batch_idx]
                model.store.zero_grad()
                rng = np.random.default_rng([seed, 23, epoch, bi])
                logits, cache = model.forward_batch(batch, rng=rng, train=True)
                loss, dlogits = weighted_cross_entropy_batch(logits, batch_labels, weights)
                model.backward(cache, dlogits)
                optimizer.step(model.store)
                total_loss += loss * len(batch)
                preds[batch_idx] = logits.argmax(axis=1)
            train_loss = total_loss / len(epoch_samples)
            train_metrics = metrics_from_predictions(labels, preds, n_classes)
            history.append((epoch, "train", train_loss, train_metrics.mean_class_accuracy))

            test_metrics, test_loss = evaluate_with_loss(
                model, test_samples, n_classes, weights, cfg.batch_size
            )
            history.append((epoch, "test", test_loss, test_metrics.mean_class_accuracy))
            final_test = test_metrics
            if test_metrics.mean_class_accuracy > best_acc:
                best_acc = test_metrics.mean_class_accuracy
                best_epoch = epoch
                best_state = {k: v.copy() for k, v in model.store.state_dict().items()}
            if verbose:
                print(
                    f"epoch {epoch:3d}: train loss {train_loss:.4f} "
                    f"acc {train_metrics.mean_class_accuracy:.3f} | "
                    f"test acc {test_metrics.mean_class_accuracy:.3f}"
                )
    finally:
        if pool is not None:
            pool.shutdown()

    result = FitResult(
        history=history,
        best_epoch=best_epoch,
        best_test_acc=best_acc,
        best_state=best_state,
        final_test=final_test,
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_container(out / "checkpoint_best.pgrf", best_state)
        (out / "metrics.txt").write_text("\n".join(result.history_lines()) + "\n")
    return result


def evaluate_with_loss(model, samples, n_classes: int,
                       weights: ClassWeights | None = None,
                       batch_size: int = 32) -> tuple[MetricsReport, float]:
    labels = np.array([s.label for s in samples], dtype=np.int64)
    preds = np.empty(len(samples), dtype=np.int64)
    total_loss = 0.0
    order = np.arange(len(samples))
    for batch_idx in _batches(order, batch_size):
        batch = [samples[i] for i in batch_idx]
        logits, _ = model.forward_batch(batch, rng=None, train=False)
        loss, _ = weighted_cross_entropy_batch(logits, labels[batch_idx], weights)
        total_loss += loss * len(batch)
        preds[batch_idx] = logits.argmax(axis=1)
    metrics = metrics_from_predictions(labels, preds, n_classes)
    return metrics, total_loss / max(1, len(samples))


def evaluate(model, samples, n_classes: int) -> MetricsReport:
    """Confusion matrix and mean of per-class recalls on a labelled set."""
    metrics, _ = evaluate_with_loss(model, samples, n_classes)
    return metrics
