"""Reader/writer for the binary dataset container the classifier consumes.

Layout (little-endian): magic ``TSVD``, u32 version 1, u32 sample count,
u32 window length, u32 channel count, u32 class count, the class names
(u16 length + UTF-8 bytes each), then per sample a u32 label followed by
length*channels float32 values with each time step's channels consecutive.
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .errors import PrepFormatError

MAGIC = b"TSVD"
VERSION = 1


def write_tsvd(path, signals: np.ndarray, labels: np.ndarray, class_names: list[str]) -> None:
    """Atomic write: the file appears complete or not at all."""
    signals = np.asarray(signals, dtype=np.float32)
    labels = np.asarray(labels, dtype=np.int64)
    num, length, channels = signals.shape
    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    # mkstemp files are 0600; give the output normal umask-derived permissions
    umask = os.umask(0)
    os.umask(umask)
    os.chmod(tmp, 0o666 & ~umask)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<5I", VERSION, num, length, channels, len(class_names)))
            for name in class_names:
                raw = name.encode("utf-8")
                fh.write(struct.pack("<H", len(raw)))
                fh.write(raw)
            for signal, label in zip(signals, labels):
                fh.write(struct.pack("<I", int(label)))
                fh.write(np.ascontiguousarray(signal, dtype="<f4").tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_tsvd(path):
    """Returns (signals (n, length, channels) float32, labels, class_names)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise PrepFormatError(f"{path}: not a dataset file")
    version, num, length, channels, n_classes = struct.unpack("<5I", raw[4:24])
    if version != VERSION:
        raise PrepFormatError(f"{path}: unsupported version {version}")
    off = 24
    names = []
    for _ in range(n_classes):
        (name_len,) = struct.unpack_from("<H", raw, off)
        off += 2
        names.append(raw[off:off + name_len].decode("utf-8"))
        off += name_len
    signals = np.empty((num, length, channels), dtype=np.float32)
    labels = np.empty(num, dtype=np.int64)
    step = 4 * length * channels
    for i in range(num):
        (labels[i],) = struct.unpack_from("<I", raw, off)
        off += 4
        signals[i] = np.frombuffer(raw, dtype="<f4", count=length * channels,
                                   offset=off).reshape(length, channels)
        off += step
    if off != len(raw):
        raise PrepFormatError(f"{path}: {len(raw) - off} unexpected trailing bytes")
    return signals, labels, names
