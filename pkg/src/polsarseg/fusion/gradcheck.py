"""Analytic-versus-finite-difference gradient checks for the kernel ops."""
from __future__ import annotations

import numpy as np

from ..errors import NumericError, ValidationError
from . import kernel, losses
from .autograd import Tensor, parameter, softmax
from .weights import KernelWeights

# Denominator floor, relative to the probed objective: central differences
# carry roundoff of about |f| * 2e-11 at epsilon 1e-5, so entries smaller
# than this are compared in absolute terms.
GRAD_FLOOR = 1e-5


def _probe(out, seed=12345):
    """Reduce any output to a scalar with a fixed random projection."""
    outs = out if isinstance(out, tuple) else (out,)
    rng = np.random.default_rng(seed)
    total = None
    for o in outs:
        if isinstance(o, kernel.PromptPair):
            parts = (o.sparse, o.dense)
        else:
            parts = (o,)
        for t in parts:
            term = (t * rng.standard_normal(t.shape)).sum()
            total = term if total is None else total + term
    return total


def _prompt(args, w):
    return kernel.PromptPair(args["sparse"], args["dense"])


# op id -> (input names, forward(inputs, weights) -> tensor or tuple)
OPS = {
    "patch_embed": (("image",), lambda a, w: kernel.patch_embed(a["image"], w, 1)),
    "ffp": (("z1", "z2"), lambda a, w: kernel.ffp(a["z1"], a["z2"], w)),
    "feature_embed_1": (("image",), lambda a, w: kernel.feature_embed_1(a["image"], w)),
    "feature_embed_2": (("onehot",), lambda a, w: kernel.feature_embed_2(a["onehot"], w)),
    "channel_split": (("x",), lambda a, w: kernel.channel_split(a["x"], w, 1)),
    "cross_attention": (("q", "kv"),
                        lambda a, w: kernel.cross_attention(a["q"], a["kv"], w, "sfp.ca_v")),
    "sfp": (("x1", "x2", "x3"), lambda a, w: kernel.sfp(a["x1"], a["x2"], a["x3"], w)),
    "sfp_progressive": (("f1", "f2", "f_fused", "f_att"),
                        lambda a, w: kernel.sfp_progressive(a["f1"], a["f2"], a["f_fused"],
                                                            a["f_att"], w)),
    "toy_encoder": (("p_f", "z1", "z2"),
                    lambda a, w: kernel.toy_encoder(a["p_f"], a["z1"], a["z2"], w)),
    "minimal_decoder": (("f1", "f2", "f_fused", "sparse", "dense"),
                        lambda a, w: kernel.minimal_decoder(a["f1"], a["f2"], a["f_fused"],
                                                            _prompt(a, w), w)),
    # losses are probed through a softmax so perturbed rows stay normalized
    "ce_loss": (("logits", "labels"),
                lambda a, w: losses.ce_loss(softmax(a["logits"]), a["labels"].data)),
    "focal_loss": (("logits", "labels"),
                   lambda a, w: losses.focal_loss(softmax(a["logits"]), a["labels"].data,
                                                  np.full(a["logits"].shape[-1],
                                                          1.0 / a["logits"].shape[-1]), 2.0)),
}
_FIXED_INPUTS = {"labels"}  # not differentiated


def random_inputs(op_id, w: KernelWeights, seed=0) -> dict:
    """Seeded inputs of the right shape for ``op_id`` under ``w.cfg``."""
    cfg = w.cfg
    rng = np.random.default_rng(seed)
    feat = (cfg.c, cfg.h, cfg.w)
    tile = cfg.tile
    if op_id not in OPS:
        raise ValidationError(f"unknown op {op_id!r}; choose from {sorted(OPS)}")
    if op_id in ("ce_loss", "focal_loss"):
        labels = np.eye(cfg.n)[rng.integers(0, cfg.n, size=8)]
        return {"logits": rng.standard_normal((8, cfg.n)), "labels": labels}
    shapes = {
        "image": (cfg.in_ch,) + tile,
        "onehot": (cfg.c_mvd,) + tile,
        "q": (cfg.hw, cfg.c), "kv": (cfg.hw + 2, cfg.c),
        "sparse": (cfg.n, cfg.c), "dense": (cfg.h, cfg.w, cfg.c),
    }
    return {name: rng.standard_normal(shapes.get(name, feat)) for name in OPS[op_id][0]}


def _objective(op_id, w, inputs):
    args = {k: (v if isinstance(v, Tensor) else Tensor(v)) for k, v in inputs.items()}
    return _probe(OPS[op_id][1](args, w))


def grad_check(op_id, w: KernelWeights, inputs=None, epsilon=1e-5, max_coords=8, seed=0):
    """Largest relative error between backprop and central differences.

    Every parameter tensor and every differentiable input is probed at up to
    ``max_coords`` seeded coordinates.  The error of one coordinate is
    ``|a - n| / max(|a|, |n|, GRAD_FLOOR * max(1, |f|))`` where ``f`` is the
    probed scalar objective.
    """
    if op_id not in OPS:
        raise ValidationError(f"unknown op {op_id!r}; choose from {sorted(OPS)}")
    inputs = random_inputs(op_id, w, seed) if inputs is None else inputs
    leaves = {k: parameter(v) for k, v in inputs.items() if k not in _FIXED_INPUTS}
    args = dict(inputs)
    args.update(leaves)
    w.zero_grad()
    loss = _objective(op_id, w, args)
    loss.backward()
    floor = GRAD_FLOOR * max(1.0, abs(float(loss.data)))
    targets = [(f"input:{k}", t) for k, t in leaves.items()]
    targets += [(name, w[name]) for name in w.names()]
    rng = np.random.default_rng(seed + 1)
    worst = 0.0
    for name, t in targets:
        grad = t.grad
        if grad is None:
            continue  # not on this op's path
        if not np.all(np.isfinite(grad)):
            raise NumericError(f"non-finite analytic gradient for {name}")
        flat = t.data.reshape(-1)
        picks = rng.choice(flat.size, size=min(max_coords, flat.size), replace=False)
        for i in picks:
            keep = flat[i]
            flat[i] = keep + epsilon
            up = _objective(op_id, w, args).data
            flat[i] = keep - epsilon
            down = _objective(op_id, w, args).data
            flat[i] = keep
            numeric = float((up - down) / (2.0 * epsilon))
            analytic = float(grad.reshape(-1)[i])
            err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)
            worst = max(worst, err)
    w.zero_grad()
    return worst
