"""Reader for the per-layer feature dumps the classifier exports.

Layout (little-endian): magic ``TSVF``, u32 version 1, u32 record count,
u32 vector width, u32 block count; per record a u32 sample index, u32 label,
u8 layer index (0 = embedding stage, 1..B = encoder blocks) and the vector
as float32.
"""

from __future__ import annotations

import struct
from typing import NamedTuple

import numpy as np

from .errors import PrepFormatError

MAGIC = b"TSVF"
VERSION = 1


class Features(NamedTuple):
    width: int
    blocks: int
    sample_index: np.ndarray
    label: np.ndarray
    layer: np.ndarray
    vectors: np.ndarray

    def layer_slice(self, layer: int):
        """(vectors, labels) of one layer, ordered by sample index."""
        picked = self.layer == layer
        order = np.argsort(self.sample_index[picked], kind="stable")
        return self.vectors[picked][order], self.label[picked][order]


def read_tsvf(path) -> Features:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise PrepFormatError(f"{path}: not a feature file")
    version, num, width, blocks = struct.unpack("<4I", raw[4:20])
    if version != VERSION:
        raise PrepFormatError(f"{path}: unsupported version {version}")
    record = 9 + 4 * width
    if len(raw) != 20 + num * record:
        raise PrepFormatError(
            f"{path}: expected {20 + num * record} bytes for {num} records, got {len(raw)}"
        )
    sample_index = np.empty(num, dtype=np.int64)
    label = np.empty(num, dtype=np.int64)
    layer = np.empty(num, dtype=np.int64)
    vectors = np.empty((num, width), dtype=np.float32)
    off = 20
    for i in range(num):
        s, lab, lay = struct.unpack_from("<IIB", raw, off)
        off += 9
        sample_index[i], label[i], layer[i] = s, lab, lay
        vectors[i] = np.frombuffer(raw, dtype="<f4", count=width, offset=off)
        off += 4 * width
    return Features(width, blocks, sample_index, label, layer, vectors)
