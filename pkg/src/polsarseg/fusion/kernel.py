"""Fusion prompts, embedders, a toy encoder and a minimal mask decoder.

Feature tensors are ``(C, H, W)``; token sequences are ``(L, C)``.  Every op
takes autograd tensors or plain arrays and returns tensors, so the same code
serves forward runs and gradient checks.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from .autograd import (Tensor, as_tensor, avg_pool2, concat, conv2d, gelu, layer_norm,
                       softmax, upsample_nearest)
from .weights import KernelWeights

NORM_EPS = 1e-6


@dataclass(frozen=True)
class PromptPair:
    """Sparse prompts ``(N, C)`` and dense prompts ``(H, W, C)``."""

    sparse: Tensor
    dense: Tensor

    def __post_init__(self):
        if self.sparse.ndim != 2 or self.dense.ndim != 3:
            raise ValidationError("prompt pair needs (N, C) sparse and (H, W, C) dense parts")
        if self.sparse.shape[1] != self.dense.shape[2]:
            raise ValidationError("sparse and dense prompts disagree on channel width")
        if not (np.all(np.isfinite(self.sparse.data)) and np.all(np.isfinite(self.dense.data))):
            raise ValidationError("prompt embeddings contain non-finite values")


def _same_shape(*xs):
    shapes = {x.shape for x in xs}
    if len(shapes) != 1:
        raise ValidationError(f"inputs disagree in shape: {sorted(shapes)}")


def _pointwise(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """1x1 convolution on ``(C, H, W)`` as a channel matmul."""
    c, h, wd = x.shape
    if w.shape[1] != c:
        raise ValidationError(f"1x1 conv expects {w.shape[1]} channels, got {c}")
    return (w @ x.reshape(c, h * wd) + b.reshape(-1, 1)).reshape(w.shape[0], h, wd)


def _linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return x @ w.T + b


def to_tokens(x: Tensor) -> Tensor:
    """``(C, H, W)`` to ``(HW, C)``, no parameters."""
    c, h, w = x.shape
    return x.reshape(c, h * w).T


def from_tokens(seq: Tensor, h: int, w: int) -> Tensor:
    return seq.T.reshape(seq.shape[1], h, w)


def _channel_norm(x: Tensor, weights: KernelWeights, prefix) -> Tensor:
    """Layer norm over the channel axis of a ``(C, H, W)`` map."""
    return from_tokens(layer_norm(to_tokens(x), weights[f"{prefix}.g"], weights[f"{prefix}.b"],
                                  eps=NORM_EPS), x.shape[1], x.shape[2])


def patch_embed(image, weights: KernelWeights, which=1) -> Tensor:
    """Non-overlapping 4x4 patch projection to ``C`` channels
    (``which=1`` for the pseudo-color image, ``2`` for the one-hot map)."""
    x = as_tensor(image)
    if x.shape[1] % 4 or x.shape[2] % 4:
        raise ValidationError(f"patch embedding needs sides divisible by 4, got {x.shape[1:]}")
    return conv2d(x, weights[f"pe{which}.w"], weights[f"pe{which}.b"], stride=4)


def ffp(z1, z2, weights: KernelWeights, return_weights=False):
    """Feature-level fusion: ``g3(a * softmax(a) + g2(z2))`` with ``a = g1(z1)``;
    the softmax runs over spatial positions separately per channel."""
    z1, z2 = as_tensor(z1), as_tensor(z2)
    _same_shape(z1, z2)
    c, h, w = z1.shape
    a = _pointwise(z1, weights["ffp.g1.w"], weights["ffp.g1.b"])
    attn = softmax(a.reshape(c, h * w), axis=1).reshape(c, h, w)
    mixed = a * attn + _pointwise(z2, weights["ffp.g2.w"], weights["ffp.g2.b"])
    out = _pointwise(mixed, weights["ffp.g3.w"], weights["ffp.g3.b"])
    return (out, attn) if return_weights else out


def feature_embed_1(image, weights: KernelWeights) -> Tensor:
    """3x3 convolution + GELU, then two 2x2 average pools (spatial / 4)."""
    x = as_tensor(image)
    if x.shape[1] % 4 or x.shape[2] % 4:
        raise ValidationError(f"embedder needs sides divisible by 4, got {x.shape[1:]}")
    y = gelu(conv2d(x, weights["fe1.conv.w"], weights["fe1.conv.b"], stride=1, pad=1))
    return avg_pool2(avg_pool2(y))


def feature_embed_2(onehot, weights: KernelWeights) -> Tensor:
    """Two stride-2 2x2 convolutions (C_mvd -> 2C -> C), each followed by
    channel norm and GELU, then a 1x1 projection (spatial / 4)."""
    x = as_tensor(onehot)
    if x.shape[0] != weights.cfg.c_mvd:
        raise ValidationError(f"one-hot input needs {weights.cfg.c_mvd} channels, got {x.shape[0]}")
    if x.shape[1] % 4 or x.shape[2] % 4:
        raise ValidationError(f"embedder needs sides divisible by 4, got {x.shape[1:]}")
    y = conv2d(x, weights["fe2.conv1.w"], weights["fe2.conv1.b"], stride=2)
    y = gelu(_channel_norm(y, weights, "fe2.ln1"))
    y = conv2d(y, weights["fe2.conv2.w"], weights["fe2.conv2.b"], stride=2)
    y = gelu(_channel_norm(y, weights, "fe2.ln2"))
    return conv2d(y, weights["fe2.proj.w"], weights["fe2.proj.b"])


def channel_split(x, weights: KernelWeights, index=1):
    """Per-position linear map C -> 2C, returned as two ``(HW, C)`` halves."""
    seq = to_tokens(as_tensor(x))
    c = seq.shape[1]
    both = _linear(seq, weights[f"sfp.split{index}.w"], weights[f"sfp.split{index}.b"])
    return both[:, :c], both[:, c:]


def cross_attention(q, kv, weights: KernelWeights, prefix, return_weights=False):
    """``softmax(Q K^T / sqrt(C)) V`` with learned projections of ``q``
    (queries) and ``kv`` (keys and values); no output projection."""
    q, kv = as_tensor(q), as_tensor(kv)
    if q.shape[1] != kv.shape[1]:
        raise ValidationError(f"channel widths differ: {q.shape[1]} vs {kv.shape[1]}")
    c = q.shape[1]
    qp = _linear(q, weights[f"{prefix}.q.w"], weights[f"{prefix}.q.b"])
    kp = _linear(kv, weights[f"{prefix}.k.w"], weights[f"{prefix}.k.b"])
    vp = _linear(kv, weights[f"{prefix}.v.w"], weights[f"{prefix}.v.b"])
    attn = softmax(qp @ kp.T * (1.0 / np.sqrt(c)), axis=1)
    out = attn @ vp
    return (out, attn) if return_weights else out


def sfp(x1, x2, x3, weights: KernelWeights, return_parts=False):
    """Semantic-level fusion prompt from three ``(C, H, W)`` inputs.

    Single inputs query the third (``v``), the third queries the single
    inputs (``u``); sparse prompts come from a linear map over the
    ``H*W`` token axis, dense prompts from a ``2C -> C`` map.
    """
    x1, x2, x3 = as_tensor(x1), as_tensor(x2), as_tensor(x3)
    _same_shape(x1, x2, x3)
    cfg = weights.cfg
    c, h, w = x1.shape
    if (c, h, w) != (cfg.c, cfg.h, cfg.w):
        raise ValidationError(f"inputs {x1.shape} do not match kernel config {(cfg.c, cfg.h, cfg.w)}")
    m1, n1 = channel_split(x1, weights, 1)
    m2, n2 = channel_split(x2, weights, 2)
    m3, n3 = channel_split(x3, weights, 3)
    v1 = cross_attention(m1, m3, weights, "sfp.ca_v")
    v2 = cross_attention(m2, m3, weights, "sfp.ca_v")
    u1 = cross_attention(n3, n1, weights, "sfp.ca_u")
    u2 = cross_attention(n3, n2, weights, "sfp.ca_u")
    s = 0.5 * (v1 + u1) + to_tokens(x1)  # (HW, C)
    s = weights["sfp.lin1.w"] @ s + weights["sfp.lin1.b"].reshape(-1, 1)  # (N, C)
    sparse = layer_norm(s, weights["sfp.norm_s.g"], weights["sfp.norm_s.b"], eps=NORM_EPS)
    d = _linear(concat([v2, u2], axis=1), weights["sfp.lin2.w"], weights["sfp.lin2.b"])
    d = layer_norm(d + to_tokens(x2), weights["sfp.norm_d.g"], weights["sfp.norm_d.b"],
                   eps=NORM_EPS)
    pair = PromptPair(sparse, d.reshape(h, w, c))
    if return_parts:
        return pair, {"v1": v1, "v2": v2, "u1": u1, "u2": u2}
    return pair


def sfp_progressive(f1, f2, f_fused, f_att, weights: KernelWeights):
    """Two prompt levels from one shared weight set."""
    f1, f2, f_fused, f_att = (as_tensor(t) for t in (f1, f2, f_fused, f_att))
    _same_shape(f1, f2, f_fused, f_att)
    level1 = sfp(f1, f2, f_fused, weights)
    level2 = sfp(f_fused + f1, f_fused + f2, f_att, weights)
    return level1, level2


def toy_encoder(p_f, z1, z2, weights: KernelWeights) -> Tensor:
    """Stand-in image encoder: concatenate, project to C, then two pre-norm
    residual self-attention blocks."""
    p_f, z1, z2 = as_tensor(p_f), as_tensor(z1), as_tensor(z2)
    _same_shape(p_f, z1, z2)
    c, h, w = p_f.shape
    x = _pointwise(concat([p_f, z1, z2], axis=0), weights["enc.proj.w"], weights["enc.proj.b"])
    seq = to_tokens(x)
    for i in range(2):
        normed = layer_norm(seq, weights[f"enc.blk{i}.ln.g"], weights[f"enc.blk{i}.ln.b"],
                            eps=NORM_EPS)
        seq = seq + cross_attention(normed, normed, weights, f"enc.blk{i}.attn")
    return from_tokens(seq, h, w)


def minimal_decoder(f1, f2, f_fused, prompts: PromptPair, weights: KernelWeights, upscale=4):
    """Score maps ``(N, upscale*H, upscale*W)`` and the attended image map.

    Image tokens are ``F1 + F2 + F_fused`` plus the dense prompts.  Sparse
    tokens attend to the image, then the image attends to the updated tokens;
    the latter (``F_att``, ``(C, H, W)``) feeds the second prompt level.
    Scores are token/pixel dot products on nearest-upsampled features.
    """
    f1, f2, f_fused = as_tensor(f1), as_tensor(f2), as_tensor(f_fused)
    _same_shape(f1, f2, f_fused)
    c, h, w = f1.shape
    if prompts.dense.shape != (h, w, c):
        raise ValidationError(f"dense prompts {prompts.dense.shape} do not match {(h, w, c)}")
    img = to_tokens(f1 + f2 + f_fused) + prompts.dense.reshape(h * w, c)
    tok = prompts.sparse + cross_attention(prompts.sparse, img, weights, "dec.t2i")
    tok = layer_norm(tok, weights["dec.ln_t.g"], weights["dec.ln_t.b"], eps=NORM_EPS)
    img = img + cross_attention(img, tok, weights, "dec.i2t")
    img = layer_norm(img, weights["dec.ln_i.g"], weights["dec.ln_i.b"], eps=NORM_EPS)
    f_att = from_tokens(img, h, w)
    up = upsample_nearest(f_att, upscale)
    scores = (tok @ up.reshape(c, -1)).reshape(tok.shape[0], h * upscale, w * upscale)
    return scores, f_att


def _unit_range(x):
    lo, hi = x.min(), x.max()
    return np.zeros_like(x) if hi <= lo else (x - lo) / (hi - lo)


def visualize_prompts(prompts: PromptPair, normalize=True):
    """Channel-mean of the dense prompts (``V_D``, ``(H, W)``) and of each
    sparse-times-dense product (``(N, H, W)``); each map rescaled to [0, 1]."""
    dense = prompts.dense.data
    sparse = prompts.sparse.data
    v_d = dense.mean(axis=2)
    v_sd = (sparse[:, None, None, :] * dense[None]).mean(axis=3)
    if normalize:
        v_d = _unit_range(v_d)
        v_sd = np.stack([_unit_range(m) for m in v_sd])
    return v_d, v_sd


@dataclass(frozen=True)
class FusionOutput:
    z1: Tensor
    z2: Tensor
    p_f: Tensor
    f_fused: Tensor
    f1: Tensor
    f2: Tensor
    level1: PromptPair
    f_att: Tensor
    level2: PromptPair
    scores: Tensor


def run_pipeline(rgb, onehot, weights: KernelWeights) -> FusionOutput:
    """Full chain on one tile pair: patch embeddings, feature-level fusion,
    toy encoder, first prompt level, decoder attention, second prompt level
    and final score maps.  ``rgb`` is ``(3, 4H, 4W)`` in [0, 1], ``onehot``
    is ``(C_mvd, 4H, 4W)``."""
    rgb, onehot = as_tensor(rgb), as_tensor(onehot)
    cfg = weights.cfg
    if rgb.shape[1:] != cfg.tile or onehot.shape[1:] != cfg.tile:
        raise ValidationError(f"tile pair {rgb.shape[1:]}/{onehot.shape[1:]} does not match "
                              f"the configured {cfg.tile}")
    z1 = patch_embed(rgb, weights, 1)
    z2 = patch_embed(onehot, weights, 2)
    p_f = ffp(z1, z2, weights)
    f_fused = toy_encoder(p_f, z1, z2, weights)
    f1 = feature_embed_1(rgb, weights)
    f2 = feature_embed_2(onehot, weights)
    level1 = sfp(f1, f2, f_fused, weights)
    _, f_att = minimal_decoder(f1, f2, f_fused, level1, weights)
    level2 = sfp(f_fused + f1, f_fused + f2, f_att, weights)
    scores, _ = minimal_decoder(f1, f2, f_fused, level2, weights)
    return FusionOutput(z1, z2, p_f, f_fused, f1, f2, level1, f_att, level2, scores)
