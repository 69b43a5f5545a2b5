"""Scattering amplitudes, Pauli vectors, multilooked coherency and SPAN.

Every raster is indexed ``[row, col]`` (height first).  Complex inputs are
promoted to ``complex128`` before any arithmetic.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (FormatError, NumericError, SizeMismatchError, UnsupportedVersionError,
                     ValidationError)

SLC_MAGIC = "PSLC"
SLC_VERSION = 1
_SLC_HEADER = re.compile(rb"^PSLC(\d+) (\d+) (\d+)$")
DB_EPS = 1e-10


@dataclass(frozen=True)
class ScatteringField:
    """Per-pixel scattering amplitudes of a reciprocal (S_HV = S_VH) scene."""

    s_hh: np.ndarray
    s_hv: np.ndarray
    s_vv: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        shapes = {self.s_hh.shape, self.s_hv.shape, self.s_vv.shape}
        if len(shapes) != 1 or self.s_hh.ndim != 2:
            raise ValidationError(f"channel buffers disagree in shape: {sorted(shapes)}")

    @property
    def height(self) -> int:
        return self.s_hh.shape[0]

    @property
    def width(self) -> int:
        return self.s_hh.shape[1]


@dataclass(frozen=True)
class PauliField:
    k1: np.ndarray
    k2: np.ndarray
    k3: np.ndarray

    @property
    def height(self) -> int:
        return self.k1.shape[0]

    @property
    def width(self) -> int:
        return self.k1.shape[1]

    def stack(self) -> np.ndarray:
        """Pauli vectors as an ``(H, W, 3)`` array."""
        return np.stack([self.k1, self.k2, self.k3], axis=-1)


@dataclass(frozen=True)
class CoherencyField:
    """Per-pixel 3x3 Hermitian coherency matrices, shape ``(H, W, 3, 3)``."""

    t: np.ndarray
    looks: int = 1

    @property
    def height(self) -> int:
        return self.t.shape[0]

    @property
    def width(self) -> int:
        return self.t.shape[1]


@dataclass(frozen=True)
class SpanField:
    span: np.ndarray

    @property
    def height(self) -> int:
        return self.span.shape[0]

    @property
    def width(self) -> int:
        return self.span.shape[1]


def write_slc(path, scene: ScatteringField) -> None:
    header = f"{SLC_MAGIC}{SLC_VERSION} {scene.width} {scene.height}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        for chan in (scene.s_hh, scene.s_hv, scene.s_vv):
            fh.write(np.ascontiguousarray(chan, dtype="<c8").tobytes())


def load_slc(path) -> ScatteringField:
    """Read an SLC container.

    Raises ``FileNotFoundError`` for a missing file,
    :class:`UnsupportedVersionError` for a foreign version number and
    :class:`SizeMismatchError` when the payload does not hold exactly three
    ``width x height`` complex64 channels.
    """
    raw = Path(path).read_bytes()
    newline = raw.find(b"\n")
    if newline < 0:
        raise FormatError(f"{path}: missing SLC header line")
    match = _SLC_HEADER.match(raw[:newline])
    if match is None:
        raise FormatError(f"{path}: malformed SLC header {raw[:newline][:40]!r}")
    version, width, height = (int(g) for g in match.groups())
    if version != SLC_VERSION:
        raise UnsupportedVersionError(f"{path}: SLC version {version} (expected {SLC_VERSION})")
    payload = raw[newline + 1:]
    n = width * height
    expected = 3 * n * 8
    if len(payload) != expected:
        raise SizeMismatchError(
            f"{path}: header declares {width}x{height} ({expected} payload bytes) "
            f"but payload holds {len(payload)} bytes")
    chans = np.frombuffer(payload, dtype="<c8").reshape(3, height, width)
    return ScatteringField(chans[0].copy(), chans[1].copy(), chans[2].copy(),
                           metadata={"source": str(path)})


def pauli_vector(scene: ScatteringField) -> PauliField:
    hh = scene.s_hh.astype(np.complex128)
    hv = scene.s_hv.astype(np.complex128)
    vv = scene.s_vv.astype(np.complex128)
    r = 1.0 / np.sqrt(2.0)
    with np.errstate(invalid="ignore"):  # non-finite samples are rejected by coherency()
        return PauliField(r * (hh + vv), r * (hh - vv), r * (2.0 * hv))


def _box_mean(values: np.ndarray, window: int) -> np.ndarray:
    """Boxcar mean over the leading two axes, window clamped to the image."""
    h, w = values.shape[:2]
    rad = window // 2
    total = np.zeros_like(values)
    count = np.zeros((h, w), dtype=np.float64)
    # fixed offset order keeps the summation bit-reproducible
    for dy in range(-rad, rad + 1):
        ys, yd = slice(max(dy, 0), h + min(dy, 0)), slice(max(-dy, 0), h + min(-dy, 0))
        for dx in range(-rad, rad + 1):
            xs, xd = slice(max(dx, 0), w + min(dx, 0)), slice(max(-dx, 0), w + min(-dx, 0))
            total[yd, xd] += values[ys, xs]
            count[yd, xd] += 1.0
    shape = (h, w) + (1,) * (values.ndim - 2)
    return total / count.reshape(shape)


def coherency(pauli: PauliField, window: int = 3) -> CoherencyField:
    """Multilooked coherency ``<k k^H>`` over a ``window x window`` boxcar."""
    if window < 1 or window % 2 == 0:
        raise ValidationError(f"multilook window must be odd and >= 1, got {window}")
    if window > min(pauli.width, pauli.height):
        raise ValidationError(f"window {window} exceeds image size {pauli.width}x{pauli.height}")
    k = pauli.stack()
    bad = ~np.all(np.isfinite(k), axis=-1)
    if bad.any():
        y, x = np.argwhere(bad)[0]
        raise NumericError(f"{int(bad.sum())} pixels hold non-finite samples (first at x={x}, y={y})")
    h, w = k.shape[:2]
    iu = np.triu_indices(3)
    upper = k[..., iu[0]] * np.conj(k[..., iu[1]])
    if window > 1:
        upper = _box_mean(upper, window)
    t = np.empty((h, w, 3, 3), dtype=np.complex128)
    t[..., iu[0], iu[1]] = upper
    t[..., iu[1], iu[0]] = np.conj(upper)
    d = np.arange(3)
    t[..., d, d] = t[..., d, d].real
    return CoherencyField(t, looks=window * window)


def span(coh: CoherencyField) -> SpanField:
    t = coh.t
    return SpanField(t[..., 0, 0].real + t[..., 1, 1].real + t[..., 2, 2].real)


def _quantize_db(amplitude: np.ndarray, clip_lo: float, clip_hi: float) -> np.ndarray:
    db = 20.0 * np.log10(amplitude + DB_EPS)
    lo, hi = np.percentile(db, [clip_lo, clip_hi])
    if not hi > lo:
        # flat channel: only non-zero amplitude lights up
        return np.where(amplitude > 0, 255, 0).astype(np.uint8)
    scaled = (np.clip(db, lo, hi) - lo) / (hi - lo)
    return np.floor(scaled * 255.0 + 0.5).astype(np.uint8)


def pauli_rgb(pauli: PauliField, clip_lo: float = 2.0, clip_hi: float = 98.0) -> np.ndarray:
    """8-bit Pauli pseudo-color: R=|k2|, G=|k3|, B=|k1|, each dB-scaled,
    percentile-clipped and quantized independently.  Returns ``(H, W, 3)``."""
    if not 0.0 <= clip_lo < clip_hi <= 100.0:
        raise ValidationError(f"need 0 <= clip_lo < clip_hi <= 100, got {clip_lo}, {clip_hi}")
    channels = [np.abs(pauli.k2), np.abs(pauli.k3), np.abs(pauli.k1)]
    return np.stack([_quantize_db(c, clip_lo, clip_hi) for c in channels], axis=-1)
