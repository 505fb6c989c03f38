"""Training loop, segment-count search, evaluation, and the noise sweep.

Model selection follows a min-validation-loss rule: parameters are
snapshotted whenever the epoch validation loss strictly improves and the
best snapshot is restored into the network when training finishes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import LabeledDataset, SplitSpec, add_noise, batches
from .layers import softmax_cross_entropy
from .model import DivergenceError, ModelConfig, Network, build_ssam_cnn, sgd_step

EVAL_BATCH = 512


@dataclass
class TrainConfig:
    lr: float = 0.01
    epochs: int = 500
    batch_size: int = 128
    l1_coeff: float = 0.01
    seed: int = 0
    k_min: int = 1
    k_max: int = 10
    search_epochs: int = 5

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.k_min > self.k_max or self.k_min < 1:
            raise ValueError(f"need 1 <= k_min <= k_max, got {self.k_min}..{self.k_max}")
        if self.search_epochs < 1:
            raise ValueError(f"search_epochs must be >= 1, got {self.search_epochs}")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1
    best_val_loss: float = np.inf
    best_state: dict[str, np.ndarray] | None = None

    def epochs_to_reach(self, val_acc: float) -> int | None:
        """First epoch (1-based) whose validation accuracy reaches the target."""
        for rec in self.records:
            if rec.val_acc >= val_acc:
                return rec.epoch
        return None


@dataclass
class KSearchResult:
    best_k: int
    candidates: list[tuple[int, float]]  # (K, validation loss after the short run)


def evaluate(net: Network, ds: LabeledDataset, indices: np.ndarray) -> tuple[float, float]:
    """Mean loss and accuracy over ``indices`` in inference mode."""
    indices = np.asarray(indices)
    if indices.size == 0:
        raise ValueError("cannot evaluate on an empty index set")
    total_loss = 0.0
    correct = 0
    for x, y in batches(ds, indices, batch_size=EVAL_BATCH):
        logits = net.forward(x, train=False)
        loss, _ = softmax_cross_entropy(logits, y)
        total_loss += loss * len(y)
        correct += int((logits.argmax(axis=1) == y).sum())
    return total_loss / len(indices), correct / len(indices)


def train(net: Network, ds: LabeledDataset, split: SplitSpec, cfg: TrainConfig) -> TrainHistory:
    """Shuffled mini-batch SGD with min-validation-loss checkpointing.

    Per-epoch train metrics are instance-weighted averages over that epoch's
    batches. The best snapshot (by validation loss, strict improvement) is
    restored into ``net`` before returning.
    """
    if net.config.input_length != ds.length:
        raise ValueError(
            f"network expects length {net.config.input_length}, dataset has {ds.length}"
        )
    history = TrainHistory()
    n_train = len(split.train)
    for epoch in range(1, cfg.epochs + 1):
        rng = np.random.default_rng([cfg.seed, epoch, 0xB47C])
        loss_sum = 0.0
        correct = 0
        for x, y in batches(ds, split.train, cfg.batch_size, rng=rng):
            logits = net.forward(x, train=True)
            if not np.all(np.isfinite(logits)):
                raise DivergenceError(f"non-finite training loss at epoch {epoch}")
            loss = net.backward(y)
            sgd_step(net, lr=cfg.lr, l1_coeff=cfg.l1_coeff)
            loss_sum += loss * len(y)
            correct += int((logits.argmax(axis=1) == y).sum())
        val_loss, val_acc = evaluate(net, ds, split.val)
        if not np.isfinite(val_loss):
            raise DivergenceError(f"non-finite validation loss at epoch {epoch}")
        history.records.append(
            EpochRecord(epoch, loss_sum / n_train, correct / n_train, val_loss, val_acc)
        )
        if val_loss < history.best_val_loss:
            history.best_val_loss = val_loss
            history.best_epoch = epoch
            history.best_state = net.state_dict()
    net.load_state_dict(history.best_state)
    return history


def search_k(
    ds: LabeledDataset,
    split: SplitSpec,
    cfg: TrainConfig,
    num_classes: int | None = None,
) -> KSearchResult:
    """Short-run search for the segment count.

    For each candidate K in [k_min, k_max] with a non-degenerate segment
    length, train a fresh network (per-candidate derived seed) for
    ``search_epochs`` epochs and score it by the final epoch's validation
    loss. Smallest K wins ties.
    """
    num_classes = num_classes if num_classes is not None else ds.class_count
    candidates: list[tuple[int, float]] = []
    for k in range(cfg.k_min, cfg.k_max + 1):
        if ds.length // k < 2:
            continue
        model_cfg = ModelConfig(input_length=ds.length, num_classes=num_classes, num_segments=k)
        net = build_ssam_cnn(model_cfg, seed=_derive_seed(cfg.seed, k))
        short = TrainConfig(
            lr=cfg.lr,
            epochs=cfg.search_epochs,
            batch_size=cfg.batch_size,
            l1_coeff=cfg.l1_coeff,
            seed=_derive_seed(cfg.seed, k),
            k_min=cfg.k_min,
            k_max=cfg.k_max,
            search_epochs=cfg.search_epochs,
        )
        history = train(net, ds, split, short)
        candidates.append((k, history.records[-1].val_loss))
    if not candidates:
        raise ValueError("every candidate segment count was degenerate for this series length")
    best_k = min(candidates, key=lambda pair: (pair[1], pair[0]))[0]
    return KSearchResult(best_k=best_k, candidates=candidates)


def _derive_seed(master: int, stream: int) -> int:
    # Stable per-candidate seeds: independent streams, reproducible from the master.
    return int(np.random.SeedSequence([master, stream]).generate_state(1)[0])


def noise_sweep(
    net: Network,
    ds: LabeledDataset,
    test_indices: np.ndarray,
    levels: list[float],
    seed: int = 0,
) -> list[tuple[float, float]]:
    """Accuracy on noise-corrupted copies of the test partition.

    Each level gets a fresh derived noise seed; level 0 reproduces the plain
    evaluation.
    """
    rows = []
    for i, level in enumerate(levels):
        noisy = add_noise(ds, level, seed=_derive_seed(seed, i))
        _, acc = evaluate(net, noisy, test_indices)
        rows.append((float(level), acc))
    return rows


def write_history_csv(history: TrainHistory, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "train_acc", "val_loss", "val_acc"])
        for rec in history.records:
            writer.writerow(
                [rec.epoch, repr(rec.train_loss), repr(rec.train_acc), repr(rec.val_loss), repr(rec.val_acc)]
            )


def write_ksearch_csv(result: KSearchResult, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["K", "val_loss", "selected"])
        for k, loss in result.candidates:
            writer.writerow([k, repr(loss), int(k == result.best_k)])


def write_noise_csv(rows: list[tuple[float, float]], path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sigma_rel", "accuracy"])
        for sigma_rel, acc in rows:
            writer.writerow([repr(sigma_rel), repr(acc)])
