"""Labeled signal windows: container, resampling, splits, disk format.

Includes a synthetic four-class vibration generator used for desk-scale
training runs where no measured corpus is available.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadMagicError,
    BadVersionError,
    DataError,
    ShapeMismatchError,
    TruncatedFileError,
)

DATASET_MAGIC = b"TSVD"
DATASET_VERSION = 1

SYNTH_CLASS_NAMES = ["tone", "tone+3rd-harmonic", "am-impacts", "tone+2x-unbalance"]


@dataclass
class Dataset:
    """Fixed-length labeled windows.

    ``signals`` is (num_samples, signal_len, channels) float32 and ``labels``
    (num_samples,) int32; every label < len(class_names).
    """

    signals: np.ndarray
    labels: np.ndarray
    class_names: list[str]

    def __post_init__(self) -> None:
        self.signals = np.asarray(self.signals, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int32).reshape(-1)
        if self.signals.ndim != 3:
            raise DataError(f"signals must be 3-D, got shape {self.signals.shape}")
        if len(self.signals) != len(self.labels):
            raise DataError(
                f"{len(self.signals)} signals but {len(self.labels)} labels"
            )
        if len(self.labels) and (
            self.labels.min() < 0 or self.labels.max() >= len(self.class_names)
        ):
            raise DataError("label outside [0, num_classes)")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def signal_len(self) -> int:
        return self.signals.shape[1]

    @property
    def channels(self) -> int:
        return self.signals.shape[2]

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def subset(self, indices) -> "Dataset":
        return Dataset(self.signals[indices], self.labels[indices], list(self.class_names))

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)


@dataclass
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise DataError(f"train_fraction must be in (0, 1), got {self.train_fraction}")


def sliding_window(signal: np.ndarray, width: int) -> list[np.ndarray]:
    """Cut (T, C) into floor(T / width) consecutive non-overlapping windows.

    The tail shorter than ``width`` is discarded.
    """
    if width < 1:
        raise DataError(f"window width must be >= 1, got {width}")
    signal = np.asarray(signal)
    if signal.ndim == 1:
        signal = signal[:, None]
    count = signal.shape[0] // width
    return [signal[i * width:(i + 1) * width] for i in range(count)]


def split(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Stratified shuffle split: per class, floor(fraction * count) samples go
    to train, the rest to test.  Disjoint, exhaustive, seed-deterministic."""
    gen = np.random.Generator(np.random.PCG64(spec.seed))
    train_idx: list[np.ndarray] = []
    test_idx: list[np.ndarray] = []
    for label in range(dataset.num_classes):
        members = np.flatnonzero(dataset.labels == label)
        if len(members) < 2:
            raise DataError(
                f"class {label} ({dataset.class_names[label]}) has "
                f"{len(members)} samples; need at least 2 to split"
            )
        order = members[gen.permutation(len(members))]
        cut = int(len(members) * spec.train_fraction)
        train_idx.append(order[:cut])
        test_idx.append(order[cut:])
    return (
        dataset.subset(np.concatenate(train_idx)),
        dataset.subset(np.concatenate(test_idx)),
    )


def standardize(dataset: Dataset) -> Dataset:
    """Per-sample zero mean / unit variance (optional; windows are stored raw
    by default and the model consumes them unnormalised)."""
    flat = dataset.signals.reshape(len(dataset), -1)
    mean = flat.mean(axis=1)[:, None, None]
    std = flat.std(axis=1)[:, None, None]
    std[std == 0] = 1.0
    return Dataset((dataset.signals - mean) / std, dataset.labels, list(dataset.class_names))


def write_dataset(dataset: Dataset, path) -> None:
    """Little-endian container: magic, version, counts, class names, then per
    sample a u32 label followed by signal_len*channels float32 values with the
    channel values of each time step stored consecutively."""
    with open(path, "wb") as fh:
        fh.write(DATASET_MAGIC)
        fh.write(struct.pack("<5I", DATASET_VERSION, len(dataset),
                             dataset.signal_len, dataset.channels, dataset.num_classes))
        for name in dataset.class_names:
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
        for signal, label in zip(dataset.signals, dataset.labels):
            fh.write(struct.pack("<I", int(label)))
            fh.write(np.ascontiguousarray(signal, dtype="<f4").tobytes())


def read_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        raw = fh.read()
    view = memoryview(raw)
    off = 0

    def take(nbytes: int, what: str):
        nonlocal off
        if off + nbytes > len(raw):
            raise TruncatedFileError(f"{path}: file ends inside {what}")
        chunk = view[off:off + nbytes]
        off += nbytes
        return chunk

    if bytes(take(4, "magic")) != DATASET_MAGIC:
        raise BadMagicError(f"{path}: not a dataset file (bad magic)")
    version, num, length, channels, n_classes = struct.unpack("<5I", take(20, "header"))
    if version != DATASET_VERSION:
        raise BadVersionError(f"{path}: unsupported dataset version {version}")
    names = []
    for i in range(n_classes):
        (name_len,) = struct.unpack("<H", take(2, f"class name {i} length"))
        names.append(bytes(take(name_len, f"class name {i}")).decode("utf-8"))
    signals = np.empty((num, length, channels), dtype=np.float32)
    labels = np.empty(num, dtype=np.int32)
    sample_bytes = 4 * length * channels
    for i in range(num):
        (labels[i],) = struct.unpack("<I", take(4, f"sample {i} label"))
        chunk = take(sample_bytes, f"sample {i} payload")
        signals[i] = np.frombuffer(chunk, dtype="<f4").reshape(length, channels)
    if off != len(raw):
        raise ShapeMismatchError(f"{path}: {len(raw) - off} trailing bytes")
    if num and labels.max() >= n_classes:
        raise DataError(f"{path}: label {labels.max()} outside declared classes")
    return Dataset(signals, labels, names)


def gen_synthetic(n_per_class: int, signal_len: int, seed: int) -> Dataset:
    """Four synthetic vibration classes at a fixed base frequency.

    0: single tone; 1: tone plus third harmonic; 2: amplitude-modulated tone
    (periodic impact bursts); 3: tone plus a strong second-harmonic component.
    Every sample gets a random phase, +-20% amplitude jitter and white noise
    at 10 dB SNR, so classes differ in structure rather than scale.
    """
    if signal_len < 32:
        raise DataError(f"signal_len must be >= 32, got {signal_len}")
    gen = np.random.Generator(np.random.PCG64(seed))
    base_freq = 50.0 / 1280.0  # cycles per sample
    t = np.arange(signal_len, dtype=np.float64)
    signals = np.empty((4 * n_per_class, signal_len, 1), dtype=np.float32)
    labels = np.empty(4 * n_per_class, dtype=np.int32)
    row = 0
    for label in range(4):
        for _ in range(n_per_class):
            phase = gen.uniform(0.0, 2.0 * np.pi)
            amp = 1.0 + gen.uniform(-0.2, 0.2)
            carrier = np.sin(2.0 * np.pi * base_freq * t + phase)
            if label == 0:
                s = carrier
            elif label == 1:
                phase3 = gen.uniform(0.0, 2.0 * np.pi)
                s = carrier + 0.8 * np.sin(2.0 * np.pi * 3.0 * base_freq * t + phase3)
            elif label == 2:
                phase_m = gen.uniform(0.0, 2.0 * np.pi)
                envelope = 1.0 + 0.9 * np.sin(2.0 * np.pi * (base_freq / 8.0) * t + phase_m)
                s = envelope * carrier
            else:
                phase2 = gen.uniform(0.0, 2.0 * np.pi)
                s = carrier + 1.0 * np.sin(2.0 * np.pi * 2.0 * base_freq * t + phase2)
            s = amp * s
            noise_std = np.sqrt(np.mean(s * s) / 10.0)  # 10 dB SNR
            s = s + gen.normal(0.0, noise_std, size=signal_len)
            signals[row, :, 0] = s.astype(np.float32)
            labels[row] = label
            row += 1
    return Dataset(signals, labels, list(SYNTH_CLASS_NAMES))
