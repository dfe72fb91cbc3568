"""Dense float kernels, their backward passes, and a seeded RNG.

All operations are pure functions over numpy arrays (row-major, float32 by
default).  Each differentiable op has a matching ``*_backward`` that consumes
the cache produced by the forward call and returns vector-Jacobian products
for every input.  Arrays may carry leading batch axes; every op works on the
trailing one or two axes.

Gradient checking runs the same code in float64: every op preserves the dtype
of its inputs, so casting the inputs is enough to switch precision.
"""

from __future__ import annotations

import contextlib
from typing import NamedTuple

import numpy as np
from scipy.special import erf

from .errors import ConfigError, ContractError, ShapeError

INV_SQRT2 = 0.7071067811865476
INV_SQRT_2PI = 0.3989422804014327

# Active FLOP counters (usually zero or one; a list keeps nesting harmless).
_flop_counters: list["FlopCounter"] = []


class FlopCounter:
    """Tallies 2*a*b*c per matmul routed through this module while active."""

    def __init__(self) -> None:
        self.matmul_flops = 0


@contextlib.contextmanager
def count_matmul_flops():
    """Context manager instrumenting every matmul() executed inside it."""
    counter = FlopCounter()
    _flop_counters.append(counter)
    try:
        yield counter
    finally:
        _flop_counters.remove(counter)


class Rng:
    """Seeded 64-bit generator (PCG64) with a reproducible draw sequence.

    A given seed yields the identical sequence on every platform and run.
    Instances must not be shared between concurrent callers.
    """

    ALGORITHM = "pcg64"

    def __init__(self, seed: int) -> None:
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def normal(self, shape, std=1.0, dtype=np.float32) -> np.ndarray:
        return self._gen.normal(0.0, std, size=shape).astype(dtype)

    def truncated_normal(self, shape, std=0.02, dtype=np.float32) -> np.ndarray:
        """Normal(0, std) with re-draws until every sample lies in +-2 std."""
        out = self._gen.normal(0.0, std, size=shape)
        bad = np.abs(out) > 2.0 * std
        while bad.any():
            out[bad] = self._gen.normal(0.0, std, size=int(bad.sum()))
            bad = np.abs(out) > 2.0 * std
        return out.astype(dtype)

    def uniform(self, shape, dtype=np.float32) -> np.ndarray:
        if np.dtype(dtype) == np.float32:
            return self._gen.random(size=shape, dtype=np.float32)
        return self._gen.random(size=shape, dtype=np.float64).astype(dtype)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product over the trailing two axes, broadcasting the rest.

    Raises ShapeError naming both shapes when the inner extents differ.
    """
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner extents differ: {a.shape} vs {b.shape}")
    out = np.matmul(a, b)
    if _flop_counters:
        stacked = int(np.prod(out.shape[:-2], dtype=np.int64)) if out.ndim > 2 else 1
        cost = 2 * stacked * a.shape[-2] * a.shape[-1] * b.shape[-1]
        for counter in _flop_counters:
            counter.matmul_flops += cost
    return out


def matmul_backward(a: np.ndarray, b: np.ndarray, d_out: np.ndarray):
    da = np.matmul(d_out, np.swapaxes(b, -1, -2))
    db = np.matmul(np.swapaxes(a, -1, -2), d_out)
    # Sum broadcast batch axes back down to the parameter shapes.
    da = _unbroadcast(da, a.shape)
    db = _unbroadcast(db, b.shape)
    return da, db


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    return grad


def softmax_rows(x: np.ndarray) -> np.ndarray:
    """Row-wise softmax over the last axis, stabilised by max subtraction.

    NaN inputs propagate to the output; they are not trapped.
    """
    out = x - x.max(axis=-1, keepdims=True)
    np.exp(out, out=out)
    out /= out.sum(axis=-1, keepdims=True)
    return out


def softmax_rows_backward(probs: np.ndarray, d_out: np.ndarray) -> np.ndarray:
    inner = (d_out * probs).sum(axis=-1, keepdims=True)
    return probs * (d_out - inner)


class LayerNormCache(NamedTuple):
    x_hat: np.ndarray
    inv_std: np.ndarray
    gamma: np.ndarray


def layer_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float = 1e-5):
    """Normalise each row to zero mean / unit variance, then scale and shift.

    Uses the population variance (divisor = row width).  Returns (out, cache).
    """
    if eps <= 0:
        raise ConfigError(f"layer_norm eps must be positive, got {eps}")
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x - mean) * inv_std
    out = gamma * x_hat + beta
    return out, LayerNormCache(x_hat, inv_std, gamma)


def layer_norm_backward(cache: LayerNormCache, d_out: np.ndarray):
    x_hat, inv_std, gamma = cache
    sum_axes = tuple(range(d_out.ndim - 1))
    d_beta = d_out.sum(axis=sum_axes)
    d_gamma = (d_out * x_hat).sum(axis=sum_axes)
    d_hat = d_out * gamma
    # Population-variance norm: the 1/m factors live inside the two means.
    dx = inv_std * (
        d_hat
        - d_hat.mean(axis=-1, keepdims=True)
        - x_hat * (d_hat * x_hat).mean(axis=-1, keepdims=True)
    )
    return dx, d_gamma, d_beta


def gelu(x: np.ndarray) -> np.ndarray:
    """Exact x * Phi(x) with the erf-based standard-normal CDF."""
    return x * normal_cdf(x)


def normal_cdf(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + erf(x * INV_SQRT2))


def gelu_backward(x: np.ndarray, d_out: np.ndarray, cdf: np.ndarray | None = None) -> np.ndarray:
    """d/dx of x * Phi(x) = Phi(x) + x * phi(x).

    Pass the forward pass's ``normal_cdf(x)`` as ``cdf`` to skip its
    recomputation.
    """
    if cdf is None:
        cdf = normal_cdf(x)
    pdf = np.exp(-0.5 * x * x) * INV_SQRT_2PI
    return d_out * (cdf + x * pdf)


def dropout(x: np.ndarray, p: float, rng: Rng | None, training: bool):
    """Inverted dropout: zero with probability p, scale survivors by 1/(1-p).

    Returns (out, mask) where mask already carries the 1/(1-p) scaling, so
    the backward pass is a plain elementwise product.  In inference mode the
    op is the identity and the mask is all ones.
    """
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout probability must lie in [0, 1), got {p}")
    if not training or p == 0.0:
        return x, np.ones_like(x)
    keep = rng.uniform(x.shape, dtype=x.dtype) >= p
    mask = keep.astype(x.dtype) / (1.0 - p)
    return x * mask, mask


def dropout_backward(mask: np.ndarray, d_out: np.ndarray) -> np.ndarray:
    return d_out * mask


def backward_of(op: str, cache, d_out: np.ndarray):
    """Dispatch the backward pass for a forward cache produced by this module.

    ``cache`` is a tuple of whatever the matching forward needed to save:
    matmul (a, b); softmax_rows (probs,); layer_norm the LayerNormCache;
    gelu (x,); dropout (mask,); add (); transpose ().
    """
    try:
        if op == "matmul":
            return matmul_backward(cache[0], cache[1], d_out)
        if op == "softmax_rows":
            return (softmax_rows_backward(cache[0], d_out),)
        if op == "layer_norm":
            return layer_norm_backward(LayerNormCache(*cache), d_out)
        if op == "gelu":
            return (gelu_backward(cache[0], d_out),)
        if op == "dropout":
            return (dropout_backward(cache[0], d_out),)
        if op == "add":
            return d_out, d_out
        if op == "transpose":
            return (np.swapaxes(d_out, -1, -2),)
    except (TypeError, IndexError, AttributeError) as exc:
        raise ContractError(f"cache does not match op {op!r}: {exc}") from exc
    raise ContractError(f"unknown op {op!r}")
