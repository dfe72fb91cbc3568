"""The full network: patch embedding, encoder blocks, classifier.

Layer order inside a block follows the reference architecture exactly:

    z_mlr = LN(dropout(MSA(z_prev))) + z_prev          # norm BEFORE residual
    mlp   = dropout(dropout(gelu(z_mlr W1 + b1)) W2 + b2)
    z     = LN(mlp + z_mlr)                            # norm AFTER residual

Forward passes accept a single sequence (s, m) or a batch (b, s, m); every
backward routine accumulates parameter gradients into ``model.grads``.

Also provides analytic parameter/FLOP counters and the binary checkpoint
format (magic ``TSVM``).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, fields
from typing import NamedTuple

import numpy as np

from . import tensor
from .attention import MsaCache, MsaWeights, msa_backward, msa_forward
from .errors import (
    BadMagicError,
    BadVersionError,
    ConfigError,
    ContractError,
    DataError,
    ShapeError,
    ShapeMismatchError,
    TruncatedFileError,
)
from .tensor import Rng

LN_EPS = 1e-5
CHECKPOINT_MAGIC = b"TSVM"
CHECKPOINT_VERSION = 1


@dataclass
class TsvitConfig:
    """Architecture hyperparameters.

    ``signal_len`` must divide evenly into patches of ``patch_len`` samples;
    the resulting token count is ``signal_len // patch_len`` plus one class
    token.  The two ``use_*`` flags switch the position-embedding add and the
    post-embedding dropout off for ablations; the position table stays
    allocated either way so parameter counts do not depend on the flags.
    """

    signal_len: int = 2048
    channels: int = 1
    patch_len: int = 32
    embed_dim: int = 192
    heads: int = 8
    blocks: int = 8
    mlp_dim: int = 768
    num_classes: int = 10
    encoder_dropout: float = 0.1
    embed_dropout: float = 0.1
    use_position_embedding: bool = True
    use_post_embedding_dropout: bool = True

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        for name in ("signal_len", "channels", "patch_len", "embed_dim",
                     "heads", "blocks", "mlp_dim", "num_classes"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.signal_len % self.patch_len != 0:
            raise ConfigError(
                f"signal_len ({self.signal_len}) must be divisible by "
                f"patch_len ({self.patch_len})"
            )
        if self.embed_dim % self.heads != 0:
            raise ConfigError(
                f"embed_dim ({self.embed_dim}) must be divisible by heads ({self.heads})"
            )
        for name in ("encoder_dropout", "embed_dropout"):
            p = getattr(self, name)
            if not 0.0 <= p < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1), got {p}")

    @property
    def num_patches(self) -> int:
        return self.signal_len // self.patch_len

    @property
    def seq_len(self) -> int:
        return self.num_patches + 1

    @property
    def patch_dim(self) -> int:
        return self.patch_len * self.channels


@dataclass
class PatchEmbedWeights:
    kernel: np.ndarray  # (patch_len * channels, embed_dim)
    bias: np.ndarray    # (embed_dim,)


@dataclass
class BlockWeights:
    msa: MsaWeights
    ln_attn_gamma: np.ndarray
    ln_attn_beta: np.ndarray
    mlp_w1: np.ndarray  # (m, mlp_dim)
    mlp_b1: np.ndarray
    mlp_w2: np.ndarray  # (mlp_dim, m)
    mlp_b2: np.ndarray
    ln_out_gamma: np.ndarray
    ln_out_beta: np.ndarray


@dataclass
class TsvitModel:
    config: TsvitConfig
    patch: PatchEmbedWeights
    class_token: np.ndarray  # (1, m)
    pos: np.ndarray          # (n + 1, m)
    blocks: list[BlockWeights]
    ln_cls_gamma: np.ndarray
    ln_cls_beta: np.ndarray
    w_class: np.ndarray      # (m, num_classes)
    b_class: np.ndarray      # (num_classes,)
    rng_algorithm: str = Rng.ALGORITHM
    rng_seed: int = 0
    grads: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def dtype(self):
        return self.class_token.dtype


def named_parameters(model: TsvitModel):
    """Yield (name, array) for every learnable array, in checkpoint order."""
    yield "patch.kernel", model.patch.kernel
    yield "patch.bias", model.patch.bias
    yield "class_token", model.class_token
    yield "pos", model.pos
    for i, blk in enumerate(model.blocks):
        p = f"blocks.{i}"
        for name in ("wq", "wk", "wv", "bq", "bk", "bv", "wo", "bo"):
            yield f"{p}.msa.{name}", getattr(blk.msa, name)
        yield f"{p}.ln_attn_gamma", blk.ln_attn_gamma
        yield f"{p}.ln_attn_beta", blk.ln_attn_beta
        yield f"{p}.mlp_w1", blk.mlp_w1
        yield f"{p}.mlp_b1", blk.mlp_b1
        yield f"{p}.mlp_w2", blk.mlp_w2
        yield f"{p}.mlp_b2", blk.mlp_b2
        yield f"{p}.ln_out_gamma", blk.ln_out_gamma
        yield f"{p}.ln_out_beta", blk.ln_out_beta
    yield "ln_cls_gamma", model.ln_cls_gamma
    yield "ln_cls_beta", model.ln_cls_beta
    yield "w_class", model.w_class
    yield "b_class", model.b_class


def set_parameter(model: TsvitModel, name: str, value: np.ndarray) -> None:
    """Replace one learnable array, addressed by its named_parameters name."""
    parts = name.split(".")
    obj = model
    for part in parts[:-1]:
        if part == "blocks":
            continue
        obj = obj.blocks[int(part)] if part.isdigit() else getattr(obj, part)
    setattr(obj, parts[-1], value)


def zero_grads(model: TsvitModel) -> None:
    for name, param in named_parameters(model):
        buf = model.grads.get(name)
        if buf is None or buf.shape != param.shape or buf.dtype != param.dtype:
            model.grads[name] = np.zeros_like(param)
        else:
            buf.fill(0)


def init_model(config: TsvitConfig, rng: Rng) -> TsvitModel:
    """Allocate and initialise all learnable arrays.

    Weight matrices and the position table draw from a truncated normal
    (std 0.02, clipped at two standard deviations); biases, LN shifts and the
    class token start at zero, LN scales at one.
    """
    config.validate()
    m, d = config.embed_dim, config.mlp_dim

    def weight(shape):
        return rng.truncated_normal(shape, std=0.02)

    def zeros(*shape):
        return np.zeros(shape, dtype=np.float32)

    patch = PatchEmbedWeights(kernel=weight((config.patch_dim, m)), bias=zeros(m))
    class_token = zeros(1, m)
    pos = weight((config.seq_len, m))
    blocks = []
    for _ in range(config.blocks):
        msa = MsaWeights(
            wq=weight((m, m)), wk=weight((m, m)), wv=weight((m, m)),
            bq=zeros(m), bk=zeros(m), bv=zeros(m),
            wo=weight((m, m)), bo=zeros(m),
            heads=config.heads, head_dim=m // config.heads,
        )
        blocks.append(BlockWeights(
            msa=msa,
            ln_attn_gamma=np.ones(m, dtype=np.float32), ln_attn_beta=zeros(m),
            mlp_w1=weight((m, d)), mlp_b1=zeros(d),
            mlp_w2=weight((d, m)), mlp_b2=zeros(m),
            ln_out_gamma=np.ones(m, dtype=np.float32), ln_out_beta=zeros(m),
        ))
    model = TsvitModel(
        config=config,
        patch=patch,
        class_token=class_token,
        pos=pos,
        blocks=blocks,
        ln_cls_gamma=np.ones(m, dtype=np.float32),
        ln_cls_beta=zeros(m),
        w_class=weight((m, config.num_classes)),
        b_class=zeros(config.num_classes),
        rng_algorithm=rng.ALGORITHM,
        rng_seed=rng.seed,
    )
    zero_grads(model)
    return model


def cast_model(model: TsvitModel, dtype) -> TsvitModel:
    """Deep copy with every learnable array cast to ``dtype``.

    float64 copies are what the finite-difference gradient checks run on.
    """
    clone = init_model(model.config, Rng(model.rng_seed))
    for name, param in named_parameters(model):
        set_parameter(clone, name, param.astype(dtype))
    clone.rng_algorithm = model.rng_algorithm
    clone.rng_seed = model.rng_seed
    zero_grads(clone)
    return clone


# ---------------------------------------------------------------------------
# forward / backward


class EmbedCache(NamedTuple):
    patches: np.ndarray  # (..., n, patch_dim) flattened input windows
    mask: np.ndarray     # post-embedding dropout mask


class BlockCache(NamedTuple):
    z_prev: np.ndarray
    msa: MsaCache
    mask_attn: np.ndarray
    ln_attn: tensor.LayerNormCache
    z_mlr: np.ndarray
    mlp_pre: np.ndarray   # z_mlr W1 + b1, input of gelu
    gelu_cdf: np.ndarray  # Phi(mlp_pre), reused by the backward pass
    mask_hidden: np.ndarray
    gelu_dropped: np.ndarray
    mask_out: np.ndarray
    ln_out: tensor.LayerNormCache
    weights: BlockWeights


class ClassifyCache(NamedTuple):
    ln_cls: tensor.LayerNormCache
    mask: np.ndarray
    dropped: np.ndarray  # dropout(LN(z)), input of the final projection


class ModelCache(NamedTuple):
    embed: EmbedCache
    blocks: list[BlockCache]
    block_outputs: list[np.ndarray]
    classify: ClassifyCache
    dtype: np.dtype


def patch_embed(x: np.ndarray, w: PatchEmbedWeights, config: TsvitConfig) -> np.ndarray:
    """Map a signal (..., signal_len, channels) to patch tokens (..., n, m).

    Each non-overlapping window of ``patch_len`` time steps is flattened
    row-major and projected by the shared kernel: a strided one-directional
    convolution expressed as one matrix product.
    """
    if x.shape[-1] != config.channels:
        raise ShapeError(f"expected {config.channels} channels, got shape {x.shape}")
    if x.shape[-2] % config.patch_len != 0:
        raise ShapeError(
            f"signal length {x.shape[-2]} not divisible by patch_len {config.patch_len}"
        )
    n = x.shape[-2] // config.patch_len
    patches = np.ascontiguousarray(x).reshape(x.shape[:-2] + (n, config.patch_dim))
    return tensor.matmul(patches, w.kernel) + w.bias


def embed(x: np.ndarray, model: TsvitModel, rng: Rng | None, training: bool):
    """Patch-embed, prepend the class token, add positions, apply dropout."""
    cfg = model.config
    if x.shape[-2] != cfg.signal_len:
        raise ShapeError(f"expected signal length {cfg.signal_len}, got {x.shape[-2]}")
    n = cfg.num_patches
    patches = np.ascontiguousarray(x).reshape(x.shape[:-2] + (n, cfg.patch_dim))
    pe = tensor.matmul(patches, model.patch.kernel) + model.patch.bias
    cls = np.broadcast_to(model.class_token, pe.shape[:-2] + (1, cfg.embed_dim))
    z = np.concatenate([cls.astype(pe.dtype), pe], axis=-2)
    if cfg.use_position_embedding:
        z = z + model.pos
    p = cfg.embed_dropout if cfg.use_post_embedding_dropout else 0.0
    z, mask = tensor.dropout(z, p, rng, training)
    return z, EmbedCache(patches, mask)


def block_forward(z_prev: np.ndarray, w: BlockWeights, rng: Rng | None,
                  d_e: float, training: bool):
    attn_out, msa_cache = msa_forward(z_prev, w.msa)
    attn_dropped, mask_attn = tensor.dropout(attn_out, d_e, rng, training)
    ln1, ln1_cache = tensor.layer_norm(attn_dropped, w.ln_attn_gamma, w.ln_attn_beta, LN_EPS)
    z_mlr = ln1 + z_prev

    pre = tensor.matmul(z_mlr, w.mlp_w1) + w.mlp_b1
    cdf = tensor.normal_cdf(pre)
    hidden = pre * cdf
    hidden_dropped, mask_hidden = tensor.dropout(hidden, d_e, rng, training)
    out = tensor.matmul(hidden_dropped, w.mlp_w2) + w.mlp_b2
    mlp, mask_out = tensor.dropout(out, d_e, rng, training)

    z, ln2_cache = tensor.layer_norm(mlp + z_mlr, w.ln_out_gamma, w.ln_out_beta, LN_EPS)
    cache = BlockCache(z_prev, msa_cache, mask_attn, ln1_cache, z_mlr,
                       pre, cdf, mask_hidden, hidden_dropped, mask_out, ln2_cache, w)
    return z, cache


def block_backward(cache: BlockCache, d_z: np.ndarray, grads: dict, prefix: str):
    w = cache.weights
    sum_axes = tuple(range(d_z.ndim - 1))

    d_sum, d_g2, d_b2 = tensor.layer_norm_backward(cache.ln_out, d_z)
    grads[f"{prefix}.ln_out_gamma"] += d_g2
    grads[f"{prefix}.ln_out_beta"] += d_b2
    d_mlp = d_sum
    d_z_mlr = d_sum.copy()

    d_out = tensor.dropout_backward(cache.mask_out, d_mlp)
    flat_h = cache.gelu_dropped.reshape(-1, cache.gelu_dropped.shape[-1])
    grads[f"{prefix}.mlp_w2"] += flat_h.T @ d_out.reshape(-1, d_out.shape[-1])
    grads[f"{prefix}.mlp_b2"] += d_out.sum(axis=sum_axes)
    d_hidden_dropped = np.matmul(d_out, w.mlp_w2.T)
    d_hidden = tensor.dropout_backward(cache.mask_hidden, d_hidden_dropped)
    d_pre = tensor.gelu_backward(cache.mlp_pre, d_hidden, cdf=cache.gelu_cdf)
    flat_z = cache.z_mlr.reshape(-1, cache.z_mlr.shape[-1])
    grads[f"{prefix}.mlp_w1"] += flat_z.T @ d_pre.reshape(-1, d_pre.shape[-1])
    grads[f"{prefix}.mlp_b1"] += d_pre.sum(axis=sum_axes)
    d_z_mlr += np.matmul(d_pre, w.mlp_w1.T)

    d_ln1, d_g1, d_b1 = tensor.layer_norm_backward(cache.ln_attn, d_z_mlr)
    grads[f"{prefix}.ln_attn_gamma"] += d_g1
    grads[f"{prefix}.ln_attn_beta"] += d_b1
    d_attn_out = tensor.dropout_backward(cache.mask_attn, d_ln1)
    d_z_prev, msa_grads = msa_backward(cache.msa, d_attn_out)
    for name in ("wq", "wk", "wv", "bq", "bk", "bv", "wo", "bo"):
        grads[f"{prefix}.msa.{name}"] += getattr(msa_grads, name)

    return d_z_prev + d_z_mlr


def encoder_forward(z0: np.ndarray, model: TsvitModel, rng: Rng | None, training: bool):
    """Fold every block over ``z0``; per-block outputs are retained for
    feature export.  Returns (z_B, block_outputs, block_caches)."""
    z = z0
    outputs: list[np.ndarray] = []
    caches: list[BlockCache] = []
    d_e = model.config.encoder_dropout
    for blk in model.blocks:
        z, cache = block_forward(z, blk, rng, d_e, training)
        outputs.append(z)
        caches.append(cache)
    return z, outputs, caches


def classify_forward(z: np.ndarray, model: TsvitModel, rng: Rng | None, training: bool):
    """Map final class-token states (batch, m) to logits (batch, num_classes)."""
    z = np.atleast_2d(z)
    normed, ln_cache = tensor.layer_norm(z, model.ln_cls_gamma, model.ln_cls_beta, LN_EPS)
    dropped, mask = tensor.dropout(normed, model.config.encoder_dropout, rng, training)
    logits = tensor.matmul(dropped, model.w_class) + model.b_class
    return logits, ClassifyCache(ln_cache, mask, dropped)


def classify_proba(logits: np.ndarray) -> np.ndarray:
    """Class probabilities for inference (softmax over logits)."""
    return tensor.softmax_rows(logits)


def cross_entropy_loss(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over the batch, fused with softmax via logsumexp.

    Returns (loss, d_logits) with d_logits = (softmax - onehot) / batch.
    """
    logits = np.atleast_2d(logits)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    batch, n_classes = logits.shape
    if labels.shape[0] != batch:
        raise DataError(f"{labels.shape[0]} labels for {batch} logit rows")
    if labels.min() < 0 or labels.max() >= n_classes:
        raise DataError(f"label out of range [0, {n_classes}): {labels}")
    shifted = logits - logits.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1)) + logits.max(axis=1)
    picked = logits[np.arange(batch), labels]
    loss = float((logsumexp - picked).mean())
    d_logits = tensor.softmax_rows(logits)
    d_logits[np.arange(batch), labels] -= 1.0
    d_logits /= batch
    return loss, d_logits.astype(logits.dtype)


def model_forward(batch: np.ndarray, model: TsvitModel, rng: Rng | None, training: bool):
    """Full pipeline for a batch (b, signal_len, channels) -> (logits, cache)."""
    batch = np.asarray(batch)
    if batch.ndim != 3:
        raise ShapeError(f"expected (batch, signal_len, channels), got {batch.shape}")
    z0, embed_cache = embed(batch, model, rng, training)
    z, outputs, block_caches = encoder_forward(z0, model, rng, training)
    logits, cls_cache = classify_forward(z[..., 0, :], model, rng, training)
    cache = ModelCache(embed_cache, block_caches, outputs, cls_cache, batch.dtype)
    return logits, cache


def model_backward(model: TsvitModel, cache: ModelCache, d_logits: np.ndarray) -> dict:
    """Accumulate gradients for every learnable array into ``model.grads``."""
    if not model.grads:
        zero_grads(model)
    grads = model.grads
    first = next(iter(grads.values()))
    if first.dtype != cache.dtype:
        raise ContractError(
            f"gradient buffers are {first.dtype} but cache was built in {cache.dtype}"
        )
    cfg = model.config
    cls = cache.classify
    d_logits = np.atleast_2d(d_logits)

    grads["w_class"] += cls.dropped.reshape(-1, cfg.embed_dim).T @ d_logits
    grads["b_class"] += d_logits.sum(axis=0)
    d_dropped = np.matmul(d_logits, model.w_class.T)
    d_normed = tensor.dropout_backward(cls.mask, d_dropped)
    d_feat, d_gamma, d_beta = tensor.layer_norm_backward(cls.ln_cls, d_normed)
    grads["ln_cls_gamma"] += d_gamma
    grads["ln_cls_beta"] += d_beta

    z_shape = cache.block_outputs[-1].shape
    d_z = np.zeros(z_shape, dtype=d_feat.dtype)
    d_z[..., 0, :] = d_feat
    for i in range(len(model.blocks) - 1, -1, -1):
        d_z = block_backward(cache.blocks[i], d_z, grads, f"blocks.{i}")

    d_z0 = tensor.dropout_backward(cache.embed.mask, d_z)
    sum_axes = tuple(range(d_z0.ndim - 2))
    if cfg.use_position_embedding:
        grads["pos"] += d_z0.sum(axis=sum_axes) if sum_axes else d_z0
    d_cls_tok = d_z0[..., 0:1, :]
    grads["class_token"] += d_cls_tok.sum(axis=sum_axes) if sum_axes else d_cls_tok
    d_pe = d_z0[..., 1:, :]
    patches = cache.embed.patches
    grads["patch.kernel"] += (
        patches.reshape(-1, cfg.patch_dim).T @ d_pe.reshape(-1, cfg.embed_dim)
    )
    grads["patch.bias"] += d_pe.sum(axis=tuple(range(d_pe.ndim - 1)))
    return grads


# ---------------------------------------------------------------------------
# analytic counters


def count_params(config: TsvitConfig) -> int:
    """Closed-form learnable-array element count; must equal the summed
    element count of an initialised model."""
    config.validate()
    m, d, n = config.embed_dim, config.mlp_dim, config.num_patches
    patch = config.patch_dim * m + m
    class_token = m
    pos = (n + 1) * m
    per_block = 4 * (m * m + m) + 4 * m + (m * d + d) + (d * m + m)
    final_ln = 2 * m
    classifier = m * config.num_classes + config.num_classes
    return patch + class_token + pos + config.blocks * per_block + final_ln + classifier


def count_params_paper_compatible(config: TsvitConfig) -> int:
    """Parameter subset matching externally published totals for this
    architecture family: MLPs + embeddings + classifier, no attention and no
    layer norms.  The full count is the authoritative one."""
    m, d, n = config.embed_dim, config.mlp_dim, config.num_patches
    mlp = config.blocks * (m * d + d + d * m + m)
    embeddings = (config.patch_dim * m + m) + m + (n + 1) * m
    classifier = m * config.num_classes + config.num_classes
    return mlp + embeddings + classifier


@dataclass(frozen=True)
class FlopBreakdown:
    """Per-sublayer FLOPs for one forward pass of a single sample.

    Convention: one multiply-add counts as 2 FLOPs; a bias add is 1 FLOP per
    element; layer norm costs 5 and softmax 5 FLOPs per element, gelu 1.  The
    softmax element count is taken over the (s, s) attention pattern of each
    block, independent of the head count, so totals are comparable across
    head sweeps.  Itemisation lets alternative conventions be reassembled.
    """

    patch_matmul: int
    patch_bias: int
    qkv_matmul: int
    qkv_bias: int
    attn_scores_matmul: int
    attn_softmax: int
    attn_apply_matmul: int
    attn_out_matmul: int
    attn_out_bias: int
    mlp_matmul: int
    mlp_bias: int
    mlp_gelu: int
    block_ln: int
    classifier_matmul: int
    classifier_bias: int
    classifier_ln: int

    def as_dict(self) -> dict[str, int]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @property
    def total(self) -> int:
        return sum(self.as_dict().values())

    @property
    def matmul_total(self) -> int:
        return sum(v for k, v in self.as_dict().items() if k.endswith("_matmul"))

    @property
    def paper_compatible(self) -> int:
        """MLP + patch-convolution matrix-product subset (published figures)."""
        return self.mlp_matmul + self.patch_matmul


def count_flops(config: TsvitConfig) -> FlopBreakdown:
    config.validate()
    m, d, n = config.embed_dim, config.mlp_dim, config.num_patches
    s, b = n + 1, config.blocks
    n_c = config.num_classes
    return FlopBreakdown(
        patch_matmul=2 * n * config.patch_dim * m,
        patch_bias=n * m,
        qkv_matmul=b * 3 * 2 * s * m * m,
        qkv_bias=b * 3 * s * m,
        attn_scores_matmul=b * 2 * s * s * m,
        attn_softmax=b * 5 * s * s,
        attn_apply_matmul=b * 2 * s * s * m,
        attn_out_matmul=b * 2 * s * m * m,
        attn_out_bias=b * s * m,
        mlp_matmul=b * 2 * (2 * s * m * d),
        mlp_bias=b * (s * d + s * m),
        mlp_gelu=b * s * d,
        block_ln=b * 2 * 5 * s * m,
        classifier_matmul=2 * m * n_c,
        classifier_bias=n_c,
        classifier_ln=5 * m,
    )


# ---------------------------------------------------------------------------
# checkpoints

_CONFIG_PACK = "<8I2f2I"


def _pack_config(config: TsvitConfig) -> bytes:
    return struct.pack(
        _CONFIG_PACK,
        config.signal_len, config.channels, config.patch_len, config.embed_dim,
        config.heads, config.blocks, config.mlp_dim, config.num_classes,
        config.encoder_dropout, config.embed_dropout,
        int(config.use_position_embedding), int(config.use_post_embedding_dropout),
    )


def _unpack_config(raw: bytes) -> TsvitConfig:
    vals = struct.unpack(_CONFIG_PACK, raw)
    return TsvitConfig(
        signal_len=vals[0], channels=vals[1], patch_len=vals[2], embed_dim=vals[3],
        heads=vals[4], blocks=vals[5], mlp_dim=vals[6], num_classes=vals[7],
        encoder_dropout=float(vals[8]), embed_dropout=float(vals[9]),
        use_position_embedding=bool(vals[10]), use_post_embedding_dropout=bool(vals[11]),
    )


def save_checkpoint(model: TsvitModel, path) -> None:
    """Little-endian binary dump: magic, version, config, RNG id, raw arrays."""
    algo = model.rng_algorithm.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(_pack_config(model.config))
        fh.write(struct.pack("<B", len(algo)))
        fh.write(algo)
        fh.write(struct.pack("<Q", model.rng_seed))
        for _, param in named_parameters(model):
            fh.write(np.ascontiguousarray(param, dtype=np.float32).tobytes())


def load_checkpoint(path) -> TsvitModel:
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

    if bytes(take(4, "magic")) != CHECKPOINT_MAGIC:
        raise BadMagicError(f"{path}: not a model checkpoint (bad magic)")
    (version,) = struct.unpack("<I", take(4, "version"))
    if version != CHECKPOINT_VERSION:
        raise BadVersionError(f"{path}: unsupported checkpoint version {version}")
    config = _unpack_config(bytes(take(struct.calcsize(_CONFIG_PACK), "config")))
    (algo_len,) = struct.unpack("<B", take(1, "rng header"))
    algo = bytes(take(algo_len, "rng algorithm")).decode("utf-8")
    (seed,) = struct.unpack("<Q", take(8, "rng seed"))

    model = init_model(config, Rng(0))
    model.rng_algorithm = algo
    model.rng_seed = seed
    for name, param in named_parameters(model):
        chunk = take(4 * param.size, f"array {name}")
        arr = np.frombuffer(chunk, dtype="<f4").reshape(param.shape).copy()
        set_parameter(model, name, arr)
    if off != len(raw):
        raise ShapeMismatchError(f"{path}: {len(raw) - off} trailing bytes after arrays")
    zero_grads(model)
    return model
