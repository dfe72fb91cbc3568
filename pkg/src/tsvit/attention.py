"""Multi-head scaled dot-product self-attention, forward and backward.

The projections carry biases (standard transformer practice; it changes the
parameter count and is accounted for by the model counters).  Per-head query,
key and value widths equal ``embed_dim // heads``; the per-head projection
matrices are stored concatenated along columns inside single m x m arrays.

No dropout is applied inside attention: the encoder block applies dropout to
this op's output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import tensor
from .errors import ShapeError


@dataclass
class MsaWeights:
    """Projection weights for one attention layer."""

    wq: np.ndarray  # (m, m), heads concatenated along columns
    wk: np.ndarray  # (m, m)
    wv: np.ndarray  # (m, m)
    bq: np.ndarray  # (m,)
    bk: np.ndarray  # (m,)
    bv: np.ndarray  # (m,)
    wo: np.ndarray  # (m, m), output projection
    bo: np.ndarray  # (m,)
    heads: int
    head_dim: int

    def validate(self) -> None:
        m = self.wq.shape[0]
        if m % self.heads != 0 or self.head_dim != m // self.heads:
            raise ShapeError(
                f"embed dim {m} not divisible into {self.heads} heads of {self.head_dim}"
            )
        for name in ("wq", "wk", "wv", "wo"):
            if getattr(self, name).shape != (m, m):
                raise ShapeError(f"{name} must be ({m}, {m}), got {getattr(self, name).shape}")
        for name in ("bq", "bk", "bv", "bo"):
            if getattr(self, name).shape != (m,):
                raise ShapeError(f"{name} must be ({m},), got {getattr(self, name).shape}")


class MsaCache(NamedTuple):
    y: np.ndarray       # (..., s, m) input
    q: np.ndarray       # (..., h, s, d) per-head queries
    k: np.ndarray
    v: np.ndarray
    attn: np.ndarray    # (..., h, s, s) row-stochastic attention
    merged: np.ndarray  # (..., s, m) concatenated head outputs
    weights: MsaWeights


class MsaGrads(NamedTuple):
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    bq: np.ndarray
    bk: np.ndarray
    bv: np.ndarray
    wo: np.ndarray
    bo: np.ndarray


def _split_heads(x: np.ndarray, heads: int, head_dim: int) -> np.ndarray:
    # (..., s, m) -> (..., h, s, d): column block i of the projection output
    # is head i, matching the concatenated weight layout.
    new_shape = x.shape[:-1] + (heads, head_dim)
    return np.swapaxes(x.reshape(new_shape), -3, -2)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    # (..., h, s, d) -> (..., s, h*d)
    x = np.swapaxes(x, -3, -2)
    return x.reshape(x.shape[:-2] + (-1,))


def msa_forward(y: np.ndarray, w: MsaWeights):
    """Attend each row of ``y`` to every other row.

    ``y`` is (s, m) or (batch, s, m).  Returns (out, cache) with out shaped
    like ``y``.
    """
    m = w.wq.shape[0]
    if y.shape[-1] != m:
        raise ShapeError(f"input width {y.shape[-1]} does not match weights ({m})")
    h, d = w.heads, w.head_dim
    q = _split_heads(tensor.matmul(y, w.wq) + w.bq, h, d)
    k = _split_heads(tensor.matmul(y, w.wk) + w.bk, h, d)
    v = _split_heads(tensor.matmul(y, w.wv) + w.bv, h, d)
    scores = tensor.matmul(q, np.swapaxes(k, -1, -2)) / math.sqrt(d)
    attn = tensor.softmax_rows(scores)
    per_head = tensor.matmul(attn, v)
    merged = _merge_heads(per_head)
    out = tensor.matmul(merged, w.wo) + w.bo
    return out, MsaCache(y, q, k, v, attn, merged, w)


def msa_backward(cache: MsaCache, d_out: np.ndarray):
    """Returns (d_y, MsaGrads) for the forward call that produced ``cache``."""
    y, q, k, v, attn, merged, w = cache
    h, d = w.heads, w.head_dim
    m = w.wq.shape[0]
    flat = (-1, m)
    sum_axes = tuple(range(d_out.ndim - 1))

    d_wo = np.matmul(merged.reshape(flat).T, d_out.reshape(flat))
    d_bo = d_out.sum(axis=sum_axes)
    d_merged = np.matmul(d_out, w.wo.T)

    d_per_head = _split_heads(d_merged, h, d)
    d_attn = np.matmul(d_per_head, np.swapaxes(v, -1, -2))
    d_v = np.matmul(np.swapaxes(attn, -1, -2), d_per_head)
    d_scores = tensor.softmax_rows_backward(attn, d_attn) / math.sqrt(d)
    d_q = np.matmul(d_scores, k)
    d_k = np.matmul(np.swapaxes(d_scores, -1, -2), q)

    d_qm = _merge_heads(d_q)
    d_km = _merge_heads(d_k)
    d_vm = _merge_heads(d_v)

    d_wq = np.matmul(y.reshape(flat).T, d_qm.reshape(flat))
    d_wk = np.matmul(y.reshape(flat).T, d_km.reshape(flat))
    d_wv = np.matmul(y.reshape(flat).T, d_vm.reshape(flat))
    d_bq = d_qm.sum(axis=sum_axes)
    d_bk = d_km.sum(axis=sum_axes)
    d_bv = d_vm.sum(axis=sum_axes)

    d_y = (
        np.matmul(d_qm, w.wq.T)
        + np.matmul(d_km, w.wk.T)
        + np.matmul(d_vm, w.wv.T)
    )
    grads = MsaGrads(d_wq, d_wk, d_wv, d_bq, d_bk, d_bv, d_wo, d_bo)
    return d_y, grads
