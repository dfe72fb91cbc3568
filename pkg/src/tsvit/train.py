"""Adam optimizer, epoch loop, evaluation, multi-trial statistics, exports.

A trial = fresh init + full training run; repeated trials differ only in the
derived seed.  Everything is deterministic given (seed, dataset): the per-
trial RNG drives weight init, the epoch shuffles and the dropout masks in a
fixed consumption order, and gradient reduction is a fixed-order sum.
"""

from __future__ import annotations

import copy
import csv
import struct
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .data import Dataset, SplitSpec, split
from .errors import (
    BadMagicError,
    BadVersionError,
    ConfigError,
    ContractError,
    TruncatedFileError,
)
from .model import (
    TsvitConfig,
    TsvitModel,
    cross_entropy_loss,
    embed,
    encoder_forward,
    init_model,
    model_backward,
    model_forward,
    named_parameters,
    zero_grads,
)
from .tensor import Rng

EVAL_BATCH = 256
FEATURE_MAGIC = b"TSVF"
FEATURE_VERSION = 1


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 100
    epochs: int = 200
    seed: int = 0
    trials: int = 10
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    deterministic: bool = True

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.learning_rate < 0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")


class AdamState:
    """First/second moment buffers, persisted across steps."""

    def __init__(self, model: TsvitModel) -> None:
        self.step = 0
        self.m = {name: np.zeros_like(p) for name, p in named_parameters(model)}
        self.v = {name: np.zeros_like(p) for name, p in named_parameters(model)}


def adam_step(model: TsvitModel, grads: dict, state: AdamState, t: int,
              cfg: TrainConfig) -> None:
    """One bias-corrected Adam update, in place on the model arrays."""
    if t < 1:
        raise ContractError(f"step index must be >= 1, got {t}")
    b1, b2 = cfg.beta1, cfg.beta2
    # lr * m_hat / (sqrt(v_hat) + eps) with the bias corrections folded into
    # two scalars so the update needs a single temporary per parameter.
    step_scale = cfg.learning_rate / (1.0 - b1 ** t)
    v_scale = 1.0 / np.sqrt(1.0 - b2 ** t)
    for name, param in named_parameters(model):
        g = grads[name]
        if g.shape != param.shape:
            raise ContractError(f"gradient shape {g.shape} != param shape {param.shape} ({name})")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        denom = np.sqrt(v)
        denom *= v_scale
        denom += cfg.eps
        np.divide(m, denom, out=denom)
        denom *= step_scale
        param -= denom


class EpochStats(NamedTuple):
    loss: float
    accuracy: float


_BLAS_LIMITER = None


def _single_thread_blas() -> None:
    # BLAS-internal threading loses badly on this workload's small matrix
    # products; worker processes each claim one core instead.
    global _BLAS_LIMITER
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return
    _BLAS_LIMITER = threadpool_limits(limits=1)


def _check_compatible(model: TsvitModel, dataset: Dataset) -> None:
    cfg = model.config
    if dataset.signal_len != cfg.signal_len or dataset.channels != cfg.channels:
        raise ConfigError(
            f"dataset windows are {dataset.signal_len}x{dataset.channels}, model "
            f"expects {cfg.signal_len}x{cfg.channels}"
        )
    if dataset.num_classes != cfg.num_classes:
        raise ConfigError(
            f"dataset has {dataset.num_classes} classes, model expects {cfg.num_classes}"
        )


def train_epoch(model: TsvitModel, train_set: Dataset, cfg: TrainConfig,
                rng: Rng, state: AdamState) -> EpochStats:
    """One pass over the data: shuffle, then forward/backward/update per batch.

    The final partial batch is trained like any other.  Returns the mean loss
    and accuracy measured on the training-mode forward passes.
    """
    _check_compatible(model, train_set)
    order = rng.permutation(len(train_set))
    total_loss = 0.0
    total_correct = 0
    for start in range(0, len(order), cfg.batch_size):
        idx = order[start:start + cfg.batch_size]
        signals = train_set.signals[idx]
        labels = train_set.labels[idx]
        logits, cache = model_forward(signals, model, rng, training=True)
        loss, d_logits = cross_entropy_loss(logits, labels)
        zero_grads(model)
        grads = model_backward(model, cache, d_logits)
        state.step += 1
        adam_step(model, grads, state, state.step, cfg)
        total_loss += loss * len(idx)
        total_correct += int((logits.argmax(axis=1) == labels).sum())
    n = len(train_set)
    return EpochStats(total_loss / n, total_correct / n)


def evaluate(model: TsvitModel, test_set: Dataset):
    """Dropout-free forward over the whole set.

    Returns (loss, accuracy, confusion) with confusion[true][predicted]
    counts; accuracy is the trace over the total.
    """
    _check_compatible(model, test_set)
    n_c = model.config.num_classes
    confusion = np.zeros((n_c, n_c), dtype=np.int64)
    total_loss = 0.0
    for start in range(0, len(test_set), EVAL_BATCH):
        signals = test_set.signals[start:start + EVAL_BATCH]
        labels = test_set.labels[start:start + EVAL_BATCH]
        logits, _ = model_forward(signals, model, None, training=False)
        loss, _ = cross_entropy_loss(logits, labels)
        total_loss += loss * len(labels)
        preds = logits.argmax(axis=1)
        np.add.at(confusion, (labels, preds), 1)
    n = len(test_set)
    accuracy = float(np.trace(confusion)) / n
    return total_loss / n, accuracy, confusion


@dataclass
class TrialReport:
    trial: int
    train_losses: list[float] = field(default_factory=list)
    train_accs: list[float] = field(default_factory=list)
    test_losses: list[float] = field(default_factory=list)
    test_accs: list[float] = field(default_factory=list)
    best_epoch: int = 0
    best_accuracy: float = 0.0
    confusion: np.ndarray | None = None
    best_model: TsvitModel | None = None


class SweepReport(NamedTuple):
    max_acc: float
    min_acc: float
    avg_acc: float


def run_trial(train_set: Dataset, test_set: Dataset, model_cfg: TsvitConfig,
              train_cfg: TrainConfig, seed: int, trial_index: int = 0) -> TrialReport:
    rng = Rng(seed)
    model = init_model(model_cfg, rng)
    state = AdamState(model)
    report = TrialReport(trial=trial_index)
    for _ in range(train_cfg.epochs):
        train_stats = train_epoch(model, train_set, train_cfg, rng, state)
        test_loss, test_acc, confusion = evaluate(model, test_set)
        report.train_losses.append(train_stats.loss)
        report.train_accs.append(train_stats.accuracy)
        report.test_losses.append(test_loss)
        report.test_accs.append(test_acc)
        if report.best_model is None or test_acc > report.best_accuracy:
            report.best_accuracy = test_acc
            report.best_epoch = len(report.test_accs)
            report.confusion = confusion
            report.best_model = copy.deepcopy(model)
    counts = test_set.class_counts()
    assert (report.confusion.sum(axis=1) == counts).all(), "confusion rows != class counts"
    return report


def run_trials(dataset: Dataset, model_cfg: TsvitConfig, train_cfg: TrainConfig,
               workers: int = 1):
    """Split once, then train ``trials`` independently seeded runs.

    The model selected per trial is the one with the highest test accuracy
    over its epochs.  Trials are independent, so ``workers > 1`` runs them in
    parallel processes; the per-trial results (and their ordering) do not
    depend on scheduling.  Returns (SweepReport, [TrialReport...]).
    """
    train_set, test_set = split(dataset, SplitSpec(0.8, train_cfg.seed))
    args = [(train_set, test_set, model_cfg, train_cfg, train_cfg.seed + trial, trial + 1)
            for trial in range(train_cfg.trials)]
    if workers > 1 and train_cfg.trials > 1:
        import multiprocessing
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(min(workers, train_cfg.trials), initializer=_single_thread_blas) as pool:
            reports = pool.starmap(run_trial, args)
    else:
        reports = [run_trial(*a) for a in args]
    accs = [r.best_accuracy for r in reports]
    sweep = SweepReport(max(accs), min(accs), sum(accs) / len(accs))
    assert sweep.min_acc <= sweep.avg_acc <= sweep.max_acc
    return sweep, reports


# ---------------------------------------------------------------------------
# on-disk reports


def write_metrics_csv(path, reports: list[TrialReport]) -> None:
    """One row per (trial, epoch): trial,epoch,train_loss,train_acc,test_loss,test_acc."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "epoch", "train_loss", "train_acc", "test_loss", "test_acc"])
        for report in reports:
            for e in range(len(report.train_losses)):
                writer.writerow([
                    report.trial, e + 1,
                    f"{report.train_losses[e]:.6f}", f"{report.train_accs[e]:.6f}",
                    f"{report.test_losses[e]:.6f}", f"{report.test_accs[e]:.6f}",
                ])


def write_confusion_csv(path, confusion: np.ndarray, class_names: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(class_names)
        for row in confusion:
            writer.writerow([int(v) for v in row])


# ---------------------------------------------------------------------------
# feature export for layer-wise visualisation


def export_features(model: TsvitModel, dataset: Dataset, path) -> None:
    """Write one width-m feature vector per (sample, layer), dropout off.

    Layer 0 is the embedding-stage feature (mean over the embedded token
    rows, class token included); layer l in 1..B is the class-token row of
    block l's output, bitwise identical to the retained encoder output.
    """
    _check_compatible(model, dataset)
    m = model.config.embed_dim
    b_blocks = model.config.blocks
    num_records = len(dataset) * (b_blocks + 1)
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<4I", FEATURE_VERSION, num_records, m, b_blocks))
        for start in range(0, len(dataset), EVAL_BATCH):
            signals = dataset.signals[start:start + EVAL_BATCH]
            labels = dataset.labels[start:start + EVAL_BATCH]
            z0, _ = embed(signals, model, None, training=False)
            _, block_outputs, _ = encoder_forward(z0, model, None, training=False)
            embed_feat = z0.mean(axis=1)
            for j in range(len(labels)):
                sample_index = start + j
                fh.write(struct.pack("<IIB", sample_index, int(labels[j]), 0))
                fh.write(np.ascontiguousarray(embed_feat[j], dtype="<f4").tobytes())
                for layer, z in enumerate(block_outputs, start=1):
                    fh.write(struct.pack("<IIB", sample_index, int(labels[j]), layer))
                    fh.write(np.ascontiguousarray(z[j, 0], dtype="<f4").tobytes())


class FeatureFile(NamedTuple):
    embed_dim: int
    blocks: int
    sample_index: np.ndarray
    label: np.ndarray
    layer: np.ndarray
    vectors: np.ndarray  # (num_records, embed_dim)


def read_features(path) -> FeatureFile:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != FEATURE_MAGIC:
        raise BadMagicError(f"{path}: not a feature file (bad magic)")
    version, num, m, blocks = struct.unpack("<4I", raw[4:20])
    if version != FEATURE_VERSION:
        raise BadVersionError(f"{path}: unsupported feature version {version}")
    record = 9 + 4 * m
    if len(raw) != 20 + num * record:
        raise TruncatedFileError(f"{path}: expected {20 + num * record} bytes, got {len(raw)}")
    sample_index = np.empty(num, dtype=np.int64)
    label = np.empty(num, dtype=np.int64)
    layer = np.empty(num, dtype=np.int64)
    vectors = np.empty((num, m), dtype=np.float32)
    off = 20
    for i in range(num):
        s, lab, lay = struct.unpack_from("<IIB", raw, off)
        off += 9
        sample_index[i], label[i], layer[i] = s, lab, lay
        vectors[i] = np.frombuffer(raw, dtype="<f4", count=m, offset=off)
        off += 4 * m
    return FeatureFile(m, blocks, sample_index, label, layer, vectors)
