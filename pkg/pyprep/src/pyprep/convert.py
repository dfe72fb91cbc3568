"""MAT-file corpus to training/test dataset files.

Each recording's drive-end accelerometer channel is cut into 2048-sample
non-overlapping windows (sub-window tails discarded), windows are labeled
per the manifest, and a per-class 80/20 shuffle split writes the two output
files.  Windows, not recordings, are the split unit, matching the published
per-class totals.
"""

from __future__ import annotations

import os

import numpy as np
import scipy.io

from .dataset_io import write_tsvd
from .errors import ChannelNotFoundError, MissingFilesError
from .manifest import CLASS_NAMES, MANIFEST, WINDOW, Recording

TRAIN_FRACTION = 0.8


def load_drive_end_channel(path, record: Recording) -> np.ndarray:
    """Pick the drive-end time series out of a MAT recording."""
    mat = scipy.io.loadmat(path)
    key = record.channel_key
    if key not in mat:
        candidates = [k for k in mat if k.endswith("_DE_time")]
        if len(candidates) == 1:
            key = candidates[0]
        else:
            named = ", ".join(sorted(k for k in mat if not k.startswith("__")))
            raise ChannelNotFoundError(
                f"{path}: no drive-end channel {record.channel_key!r}; "
                f"variables present: {named}"
            )
    return np.asarray(mat[key], dtype=np.float32).reshape(-1)


def cut_windows(signal: np.ndarray, width: int = WINDOW) -> np.ndarray:
    count = len(signal) // width
    return signal[:count * width].reshape(count, width, 1)


def convert_cwru(source_dir, out_train, out_test, seed: int,
                 manifest: list[Recording] | None = None):
    """Returns (train_counts, test_counts) per label after writing both files."""
    manifest = MANIFEST if manifest is None else manifest
    missing = [rec.filename for rec in manifest
               if not os.path.isfile(os.path.join(source_dir, rec.filename))]
    if missing:
        raise MissingFilesError(missing)

    n_classes = max(rec.label for rec in manifest) + 1
    per_label: list[list[np.ndarray]] = [[] for _ in range(n_classes)]
    for rec in manifest:
        signal = load_drive_end_channel(os.path.join(source_dir, rec.filename), rec)
        per_label[rec.label].append(cut_windows(signal))

    gen = np.random.Generator(np.random.PCG64(seed))
    train_parts, test_parts = [], []
    train_labels, test_labels = [], []
    for label in range(n_classes):
        windows = np.concatenate(per_label[label]) if per_label[label] else \
            np.empty((0, WINDOW, 1), np.float32)
        order = gen.permutation(len(windows))
        cut = int(len(windows) * TRAIN_FRACTION)
        train_parts.append(windows[order[:cut]])
        test_parts.append(windows[order[cut:]])
        train_labels.append(np.full(cut, label))
        test_labels.append(np.full(len(windows) - cut, label))

    names = CLASS_NAMES[:n_classes]
    write_tsvd(out_train, np.concatenate(train_parts), np.concatenate(train_labels), names)
    write_tsvd(out_test, np.concatenate(test_parts), np.concatenate(test_labels), names)
    return ([len(t) for t in train_parts], [len(t) for t in test_parts])
