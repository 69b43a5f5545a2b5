"""Seeded parameter records for the fusion kernel and their serialization."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import FormatError, UnsupportedVersionError, ValidationError
from ..io import read_json, write_json
from .autograd import Tensor, parameter

WEIGHTS_VERSION = 1


@dataclass(frozen=True)
class KernelConfig:
    """Desk-scale dimensions: ``c`` channels, ``h x w`` feature grid,
    ``n`` sparse prompts, ``c_mvd`` one-hot classes, ``patch`` input stride."""

    c: int = 32
    h: int = 16
    w: int = 16
    n: int = 6
    c_mvd: int = 13
    in_ch: int = 3
    patch: int = 4

    def __post_init__(self):
        for name in ("c", "h", "w", "n", "c_mvd", "in_ch", "patch"):
            if getattr(self, name) < 1:
                raise ValidationError(f"kernel config {name} must be >= 1")
        if self.patch != 4:
            raise ValidationError("input embedders downsample by exactly 4")

    @property
    def hw(self) -> int:
        return self.h * self.w

    @property
    def tile(self) -> tuple:
        return (self.h * self.patch, self.w * self.patch)


def _attention(prefix, c):
    out = []
    for role in ("q", "k", "v"):
        out += [(f"{prefix}.{role}.w", (c, c), c), (f"{prefix}.{role}.b", (c,), c)]
    return out


def _norm(prefix, c):
    return [(f"{prefix}.g", (c,), None), (f"{prefix}.b", (c,), None)]


def parameter_specs(cfg: KernelConfig):
    """Ordered ``(name, shape, fan_in)``; ``fan_in=None`` marks norm params."""
    c, m = cfg.c, cfg.c_mvd
    specs = [
        ("pe1.w", (c, cfg.in_ch, 4, 4), cfg.in_ch * 16), ("pe1.b", (c,), cfg.in_ch * 16),
        ("pe2.w", (c, m, 4, 4), m * 16), ("pe2.b", (c,), m * 16),
    ]
    for g in ("g1", "g2", "g3"):
        specs += [(f"ffp.{g}.w", (c, c), c), (f"ffp.{g}.b", (c,), c)]
    specs += [("enc.proj.w", (c, 3 * c), 3 * c), ("enc.proj.b", (c,), 3 * c)]
    for i in range(2):
        specs += _norm(f"enc.blk{i}.ln", c) + _attention(f"enc.blk{i}.attn", c)
    specs += [("fe1.conv.w", (c, cfg.in_ch, 3, 3), cfg.in_ch * 9),
              ("fe1.conv.b", (c,), cfg.in_ch * 9)]
    specs += [("fe2.conv1.w", (2 * c, m, 2, 2), m * 4), ("fe2.conv1.b", (2 * c,), m * 4)]
    specs += _norm("fe2.ln1", 2 * c)
    specs += [("fe2.conv2.w", (c, 2 * c, 2, 2), 8 * c), ("fe2.conv2.b", (c,), 8 * c)]
    specs += _norm("fe2.ln2", c)
    specs += [("fe2.proj.w", (c, c, 1, 1), c), ("fe2.proj.b", (c,), c)]
    for i in (1, 2, 3):
        specs += [(f"sfp.split{i}.w", (2 * c, c), c), (f"sfp.split{i}.b", (2 * c,), c)]
    specs += _attention("sfp.ca_v", c) + _attention("sfp.ca_u", c)
    specs += [("sfp.lin1.w", (cfg.n, cfg.hw), cfg.hw), ("sfp.lin1.b", (cfg.n,), cfg.hw),
              ("sfp.lin2.w", (c, 2 * c), 2 * c), ("sfp.lin2.b", (c,), 2 * c)]
    specs += _norm("sfp.norm_s", c) + _norm("sfp.norm_d", c)
    specs += _attention("dec.t2i", c) + _attention("dec.i2t", c)
    specs += _norm("dec.ln_t", c) + _norm("dec.ln_i", c)
    return specs


class KernelWeights:
    """Named parameters (autograd leaves) plus the config they were built for.

    Operations read parameters by name, so one instance shared by several
    calls really is one weight set: mutating it changes every call.
    """

    def __init__(self, cfg: KernelConfig, params: dict, seed=None):
        self.cfg = cfg
        self.params = params
        self.seed = seed
        expected = {name: shape for name, shape, _ in parameter_specs(cfg)}
        if set(params) != set(expected):
            missing = sorted(set(expected) - set(params))
            extra = sorted(set(params) - set(expected))
            raise ValidationError(f"weight names differ: missing {missing}, unexpected {extra}")
        for name, shape in expected.items():
            t = params[name]
            if t.shape != shape:
                raise ValidationError(f"{name}: shape {t.shape}, expected {shape}")
            if not np.all(np.isfinite(t.data)):
                raise ValidationError(f"{name}: non-finite values")

    def __getitem__(self, name) -> Tensor:
        return self.params[name]

    def names(self):
        return [name for name, _, _ in parameter_specs(self.cfg)]

    def zero_grad(self):
        for t in self.params.values():
            t.grad = None

    def copy(self) -> KernelWeights:
        return KernelWeights(self.cfg, {k: parameter(v.data.copy()) for k, v in self.params.items()},
                             self.seed)


def init_weights(cfg: KernelConfig = KernelConfig(), seed=0) -> KernelWeights:
    """Uniform in ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]``; norm gains 1, biases 0.

    Parameters are drawn in the fixed :func:`parameter_specs` order from one
    generator, so a seed pins every value.
    """
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape, fan_in in parameter_specs(cfg):
        if fan_in is None:
            params[name] = parameter(np.ones(shape) if name.endswith(".g") else np.zeros(shape))
        else:
            bound = 1.0 / np.sqrt(fan_in)
            params[name] = parameter(rng.uniform(-bound, bound, size=shape))
    return KernelWeights(cfg, params, seed)


def write_weights(path, weights: KernelWeights) -> Path:
    """JSON manifest (config, per-parameter shape and offset) plus a raw
    little-endian float64 payload beside it."""
    path = Path(path)
    payload = path.with_suffix(".bin")
    records, chunks, offset = [], [], 0
    for name in weights.names():
        data = weights[name].data
        records.append({"name": name, "shape": list(data.shape), "offset": offset})
        chunks.append(np.ascontiguousarray(data, dtype="<f8").reshape(-1))
        offset += data.size
    payload.write_bytes(np.concatenate(chunks).tobytes())
    cfg = weights.cfg
    write_json(path, {
        "version": WEIGHTS_VERSION,
        "kind": "fusion-weights",
        "config": {k: getattr(cfg, k) for k in ("c", "h", "w", "n", "c_mvd", "in_ch", "patch")},
        "seed": weights.seed,
        "dtype": "<f8",
        "payload": payload.name,
        "params": records,
    })
    return payload


def read_weights(path) -> KernelWeights:
    path = Path(path)
    doc = read_json(path)
    if doc.get("version") != WEIGHTS_VERSION:
        raise UnsupportedVersionError(f"{path}: weights version {doc.get('version')}")
    try:
        cfg = KernelConfig(**doc["config"])
        flat = np.frombuffer((path.parent / doc["payload"]).read_bytes(), dtype="<f8")
        params = {}
        for rec in doc["params"]:
            n = int(np.prod(rec["shape"]))
            chunk = flat[rec["offset"]:rec["offset"] + n]
            if chunk.size != n:
                raise FormatError(f"{path}: payload too short for {rec['name']}")
            params[rec["name"]] = parameter(chunk.reshape(rec["shape"]).copy())
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: malformed weights manifest ({exc})") from exc
    return KernelWeights(cfg, params, doc.get("seed"))
