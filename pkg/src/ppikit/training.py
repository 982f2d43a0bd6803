"""Training protocol: loss, optimizer, schedule, checkpointing, metrics.

The protocol is fixed: binary cross-entropy, Adam at 0.001, learning rate
multiplied by 0.9 whenever the validation loss has not improved for 5 epochs
(never reduced below 0.0008), batches of 2048, and a weight snapshot taken
each time the validation loss reaches a new minimum. After hyper-parameters
are settled, the final model is retrained from a fresh initialization on
train+validation for exactly the number of epochs that produced the best
validation loss.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .checkpoint import Checkpoint, checkpoint_from_model, restore_model
from .datasets import InteractionCorpus
from .encoding import MAX_SEQUENCE_LENGTH, encode_sequences
from .errors import EmptyDataset, ShapeMismatch
from .models import PairModel
from .nn import Parameter

BCE_EPS = 1e-12


@dataclass
class TrainingConfig:
    """Knobs of the training loop; defaults are the reference protocol."""

    batch_size: int = 2048
    learning_rate: float = 0.001
    lr_factor: float = 0.9
    lr_floor: float = 0.0008
    plateau_patience: int = 5
    max_epochs: int = 100
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 < self.lr_factor < 1.0:
            raise ValueError("lr_factor must be in (0, 1)")
        if self.lr_floor > self.learning_rate:
            raise ValueError("lr_floor must not exceed the initial learning rate")
        if self.plateau_patience < 1:
            raise ValueError("plateau_patience must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    lr: float


@dataclass
class TrainingLog:
    """Per-epoch curves plus the index of the best validation epoch."""

    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0

    @property
    def best_val_loss(self) -> float:
        if not self.epochs or self.best_epoch == 0:
            return float("inf")
        return self.epochs[self.best_epoch - 1].val_loss

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_loss", "train_acc", "val_loss", "val_acc", "lr"])
            for r in self.epochs:
                writer.writerow(
                    [r.epoch, f"{r.train_loss:.17g}", f"{r.train_acc:.17g}",
                     f"{r.val_loss:.17g}", f"{r.val_acc:.17g}", f"{r.lr:.17g}"]
                )

    @classmethod
    def from_csv(cls, path) -> "TrainingLog":
        log = cls()
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                log.epochs.append(
                    EpochRecord(
                        epoch=int(row["epoch"]),
                        train_loss=float(row["train_loss"]),
                        train_acc=float(row["train_acc"]),
                        val_loss=float(row["val_loss"]),
                        val_acc=float(row["val_acc"]),
                        lr=float(row["lr"]),
                    )
                )
        if log.epochs:
            log.best_epoch = 1 + int(np.argmin([r.val_loss for r in log.epochs]))
        return log


@dataclass
class MetricsReport:
    """Threshold metrics on the positive class; degenerate ratios are None."""

    accuracy: float
    precision: float | None
    recall: float | None
    f_score: float | None
    tp: int
    fp: int
    tn: int
    fn: int

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f_score": self.f_score,
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
        }


# --------------------------------------------------------------------------
# Encoded pair batches
# --------------------------------------------------------------------------

class EncodedPairSet:
    """Labeled sequence pairs encoded on demand, batch by batch.

    Keeping raw strings and one-hot encoding per batch holds memory at the
    batch size instead of the corpus size.
    """

    def __init__(self, seqs_a, seqs_b, labels, max_len: int = MAX_SEQUENCE_LENGTH):
        if not (len(seqs_a) == len(seqs_b) == len(labels)):
            raise ShapeMismatch(
                f"pair components disagree: {len(seqs_a)}, {len(seqs_b)}, {len(labels)}"
            )
        self.seqs_a = list(seqs_a)
        self.seqs_b = list(seqs_b)
        self.labels = np.asarray(labels, dtype=np.float64).reshape(-1, 1)
        self.max_len = max_len

    @classmethod
    def from_corpus(cls, corpus: InteractionCorpus, max_len: int = MAX_SEQUENCE_LENGTH):
        return cls(
            [p.a.sequence for p in corpus.pairs],
            [p.b.sequence for p in corpus.pairs],
            [p.label for p in corpus.pairs],
            max_len=max_len,
        )

    def __len__(self) -> int:
        return len(self.seqs_a)

    def batch(self, indices) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        xa = encode_sequences([self.seqs_a[i] for i in indices], self.max_len)
        xb = encode_sequences([self.seqs_b[i] for i in indices], self.max_len)
        return xa, xb, self.labels[indices]

    def batches(self, batch_size: int, order=None):
        idx = np.arange(len(self)) if order is None else np.asarray(order)
        for start in range(0, len(idx), batch_size):
            yield self.batch(idx[start : start + batch_size])


# --------------------------------------------------------------------------
# Loss and optimizer
# --------------------------------------------------------------------------

def bce_loss(predictions: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy and its gradient w.r.t. the predictions.

    Predictions are clamped to [eps, 1-eps] before the logs, so exact 0/1
    outputs stay finite.
    """
    predictions = np.asarray(predictions, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if predictions.shape != labels.shape:
        raise ShapeMismatch(f"predictions {predictions.shape} vs labels {labels.shape}")
    p = np.clip(predictions, BCE_EPS, 1.0 - BCE_EPS)
    n = p.size
    loss = float(-(labels * np.log(p) + (1.0 - labels) * np.log(1.0 - p)).mean())
    grad = (p - labels) / (p * (1.0 - p)) / n
    return loss, grad


class Adam:
    """Adam with bias correction over a fixed parameter list."""

    def __init__(self, params: list[Parameter], beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = [p for p in params if p.trainable]
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def step(self, lr: float):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            m_hat = m / (1.0 - b1**self.t)
            v_hat = v / (1.0 - b2**self.t)
            p.value -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


def adam_step(params: list[Parameter], state: Adam, lr: float) -> None:
    """Apply one Adam update using the gradients stored on the parameters."""
    state.step(lr)


# --------------------------------------------------------------------------
# Learning-rate schedule
# --------------------------------------------------------------------------

class PlateauScheduler:
    """Multiply the learning rate by ``factor`` after ``patience``
    non-improving epochs, clamped at ``floor``; at or below the floor no
    reduction is applied. The wait counter resets on a new best value and
    after each reduction."""

    def __init__(self, initial_lr, factor=0.9, patience=5, floor=0.0008):
        self.lr = initial_lr
        self.factor = factor
        self.patience = patience
        self.floor = floor
        self.best = float("inf")
        self.wait = 0

    def step(self, val_loss: float) -> float:
        """Record one epoch's validation loss; returns the lr for the next epoch."""
        if val_loss < self.best:
            self.best = val_loss
            self.wait = 0
            return self.lr
        self.wait += 1
        if self.wait >= self.patience:
            self.wait = 0
            if self.lr > self.floor:
                self.lr = max(self.lr * self.factor, self.floor)
        return self.lr


def plateau_schedule(
    history, current_lr, factor=0.9, patience=5, floor=0.0008
) -> float:
    """Learning rate for the epoch after ``history``.

    Replays the plateau state machine over the completed-epoch validation
    losses and applies at most the final decision to ``current_lr``: if the
    last epoch completed a full patience window without a new minimum, the
    rate is multiplied by ``factor`` and clamped at ``floor``.
    """
    best = float("inf")
    wait = 0
    reduce_now = False
    for loss in history:
        reduce_now = False
        if loss < best:
            best = loss
            wait = 0
            continue
        wait += 1
        if wait >= patience:
            wait = 0
            reduce_now = True
    if reduce_now and current_lr > floor:
        return max(current_lr * factor, floor)
    return current_lr


# --------------------------------------------------------------------------
# Train / evaluate
# --------------------------------------------------------------------------

def _dataset_loss_acc(model, dataset, batch_size, threshold=0.5):
    """Mean loss and accuracy over a dataset in inference mode."""
    loss_sum = 0.0
    correct = 0
    for xa, xb, y in dataset.batches(batch_size):
        p = model.forward_pair(xa, xb, train=False)
        pc = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
        loss_sum += float(-(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)).sum())
        correct += int(((p >= threshold) == (y == 1.0)).sum())
    n = len(dataset)
    return loss_sum / n, correct / n


def train(
    model: PairModel,
    train_set: EncodedPairSet,
    val_set: EncodedPairSet,
    config: TrainingConfig,
) -> tuple[TrainingLog, Checkpoint]:
    """Run the full protocol and return the log plus the best-epoch snapshot.

    Each epoch shuffles the training pairs with the seeded generator, runs
    forward/backward/Adam over batches, then measures loss and accuracy on
    the validation set in inference mode. The returned checkpoint holds the
    weights (and batch-norm statistics) of the epoch with minimal validation
    loss.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise EmptyDataset("train and validation sets must be non-empty")
    rng = np.random.Generator(np.random.PCG64(config.seed))
    optimizer = Adam(
        list(model.parameters().values()),
        beta1=config.adam_beta1,
        beta2=config.adam_beta2,
        eps=config.adam_eps,
    )
    scheduler = PlateauScheduler(
        config.learning_rate,
        factor=config.lr_factor,
        patience=config.plateau_patience,
        floor=config.lr_floor,
    )
    log = TrainingLog()
    best_loss = float("inf")
    best_checkpoint: Checkpoint | None = None
    lr = config.learning_rate

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(train_set))
        loss_sum = 0.0
        correct = 0
        for xa, xb, y in train_set.batches(config.batch_size, order):
            p = model.forward_pair(xa, xb, train=True)
            loss, grad = bce_loss(p, y)
            model.zero_grads()
            model.backward_pair(grad)
            optimizer.step(lr)
            loss_sum += loss * len(y)
            correct += int(((p >= 0.5) == (y == 1.0)).sum())
        train_loss = loss_sum / len(train_set)
        train_acc = correct / len(train_set)
        val_loss, val_acc = _dataset_loss_acc(model, val_set, config.batch_size)
        log.epochs.append(EpochRecord(epoch, train_loss, train_acc, val_loss, val_acc, lr))
        if val_loss < best_loss:
            best_loss = val_loss
            log.best_epoch = epoch
            best_checkpoint = checkpoint_from_model(model, epoch, config.to_dict())
        lr = scheduler.step(val_loss)

    assert best_checkpoint is not None
    return log, best_checkpoint


def retrain_final(
    model_kind: str,
    train_plus_val: EncodedPairSet,
    epochs: int,
    config: TrainingConfig,
    model_config: dict | None = None,
) -> Checkpoint:
    """Re-initialize and train for exactly ``epochs`` epochs on the merged set.

    This is the final-test procedure: no validation set exists anymore, so
    there is no checkpoint selection, and the plateau schedule is driven by
    the training loss. ``epochs`` should be the best epoch of a prior
    train() run; 0 returns the fresh initialization unchanged.
    """
    from .models import build_model  # local import to avoid cycle at module load

    if len(train_plus_val) == 0:
        raise EmptyDataset("merged training set must be non-empty")
    model_config = dict(model_config or {})
    model_config.pop("kind", None)
    model_config.setdefault("seed", config.seed)
    model = build_model(model_kind, **model_config)

    rng = np.random.Generator(np.random.PCG64(config.seed))
    optimizer = Adam(
        list(model.parameters().values()),
        beta1=config.adam_beta1,
        beta2=config.adam_beta2,
        eps=config.adam_eps,
    )
    scheduler = PlateauScheduler(
        config.learning_rate,
        factor=config.lr_factor,
        patience=config.plateau_patience,
        floor=config.lr_floor,
    )
    lr = config.learning_rate
    for _ in range(epochs):
        order = rng.permutation(len(train_plus_val))
        loss_sum = 0.0
        for xa, xb, y in train_plus_val.batches(config.batch_size, order):
            p = model.forward_pair(xa, xb, train=True)
            loss, grad = bce_loss(p, y)
            model.zero_grads()
            model.backward_pair(grad)
            optimizer.step(lr)
            loss_sum += loss * len(y)
        lr = scheduler.step(loss_sum / len(train_plus_val))
    return checkpoint_from_model(model, epochs, config.to_dict())


def confusion_counts(labels, predicted) -> tuple[int, int, int, int]:
    labels = np.asarray(labels).reshape(-1)
    predicted = np.asarray(predicted).reshape(-1)
    tp = int(np.sum((labels == 1) & (predicted == 1)))
    fp = int(np.sum((labels == 0) & (predicted == 1)))
    tn = int(np.sum((labels == 0) & (predicted == 0)))
    fn = int(np.sum((labels == 1) & (predicted == 0)))
    return tp, fp, tn, fn


def metrics_from_counts(tp, fp, tn, fn) -> MetricsReport:
    total = tp + fp + tn + fn
    accuracy = (tp + tn) / total if total else float("nan")
    precision = tp / (tp + fp) if (tp + fp) else None
    recall = tp / (tp + fn) if (tp + fn) else None
    f_score = None
    if precision is not None and recall is not None and (precision + recall) > 0:
        f_score = 2.0 * precision * recall / (precision + recall)
    return MetricsReport(accuracy, precision, recall, f_score, tp, fp, tn, fn)


def predict_probabilities(
    model: PairModel, dataset: EncodedPairSet, batch_size: int = 2048, threads: int = 1
) -> np.ndarray:
    """Inference-mode probabilities for every pair, order preserved.

    With ``threads > 1`` batches are evaluated concurrently; inference is a
    read-only pass, so sharding is safe and the concatenation order is fixed
    by the batch index.
    """
    if len(dataset) == 0:
        raise EmptyDataset("nothing to predict")
    starts = list(range(0, len(dataset), batch_size))

    def run(start):
        xa, xb, y = dataset.batch(np.arange(start, min(start + batch_size, len(dataset))))
        return model.forward_pair(xa, xb, train=False)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(run, starts))
    else:
        chunks = [run(s) for s in starts]
    return np.concatenate(chunks, axis=0)


def evaluate(
    model_or_checkpoint,
    dataset: EncodedPairSet,
    threshold: float = 0.5,
    batch_size: int = 2048,
    threads: int = 1,
) -> MetricsReport:
    """Accuracy, precision, recall and F-score at the given threshold."""
    model = model_or_checkpoint
    if isinstance(model_or_checkpoint, Checkpoint):
        model = restore_model(model_or_checkpoint)
    probs = predict_probabilities(model, dataset, batch_size, threads)
    predicted = (probs >= threshold).astype(int)
    tp, fp, tn, fn = confusion_counts(dataset.labels, predicted)
    return metrics_from_counts(tp, fp, tn, fn)
