"""Synthetic PolSAR scenes with known scattering mechanisms.

Regions are rectangles with one pure (rank-one) mechanism each.  Odd and
double bounce put all power on the first or second Pauli component; the
volume stand-in is a 45-degree oriented dipole, ``k ~ (1, 0, 1)/sqrt 2``,
whose mean alpha sits at 45 deg.  Amplitudes are circular complex Gaussian
(fully developed speckle), optionally with additive white noise.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ValidationError
from .polsar import ScatteringField

MECHANISMS = ("odd", "double", "volume")
# unit Pauli-basis directions
_DIRECTION = {
    "odd": np.array([1.0, 0.0, 0.0]),
    "double": np.array([0.0, 1.0, 0.0]),
    "volume": np.array([1.0, 0.0, 1.0]) / np.sqrt(2.0),
}


@dataclass(frozen=True)
class Region:
    mechanism: str
    x0: int
    y0: int
    x1: int
    y1: int
    power: float = 1.0

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ValidationError(f"unknown mechanism {self.mechanism!r}")
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValidationError(f"empty region {self}")


def default_regions(width, height):
    """Three vertical strips: odd | double | volume."""
    cuts = [0, width // 3, 2 * width // 3, width]
    return [Region(m, cuts[i], 0, cuts[i + 1], height) for i, m in enumerate(MECHANISMS)]


def synth_scene(width=128, height=128, regions=None, snr_db=20.0, seed=0):
    """Generate ``(scene, truth)``.

    ``truth`` holds the index into :data:`MECHANISMS` per pixel (255 where no
    region covers the pixel).  ``snr_db=None`` disables additive noise.
    """
    if width < 1 or height < 1:
        raise ValidationError(f"scene size must be positive, got {width}x{height}")
    regions = default_regions(width, height) if regions is None else list(regions)
    rng = np.random.default_rng(seed)
    k = np.zeros((height, width, 3), dtype=np.complex128)
    truth = np.full((height, width), 255, dtype=np.uint8)
    for reg in regions:
        ys, xs = slice(reg.y0, min(reg.y1, height)), slice(reg.x0, min(reg.x1, width))
        shape = (ys.stop - ys.start, xs.stop - xs.start, 1)
        g = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
        k[ys, xs] = np.sqrt(reg.power) * _DIRECTION[reg.mechanism] * g
        truth[ys, xs] = MECHANISMS.index(reg.mechanism)
    if snr_db is not None:
        noise_power = 10.0 ** (-snr_db / 10.0) / 3.0
        shape = k.shape
        n = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(noise_power / 2)
        k = k + n
    r = 1.0 / np.sqrt(2.0)
    hh = r * (k[..., 0] + k[..., 1])
    vv = r * (k[..., 0] - k[..., 1])
    hv = r * k[..., 2]
    scene = ScatteringField(hh.astype(np.complex64), hv.astype(np.complex64),
                            vv.astype(np.complex64), metadata={"generator": "synth"})
    return scene, truth


def regions_to_json(regions):
    return [asdict(r) for r in regions]


def regions_from_json(items):
    return [Region(**item) for item in items]


def boundary_mask(truth, radius):
    """Pixels within ``radius`` (Chebyshev) of a change in ``truth``."""
    h, w = truth.shape
    out = np.zeros((h, w), dtype=bool)
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            ys, yd = slice(max(dy, 0), h + min(dy, 0)), slice(max(-dy, 0), h + min(-dy, 0))
            xs, xd = slice(max(dx, 0), w + min(dx, 0)), slice(max(-dx, 0), w + min(-dx, 0))
            out[yd, xd] |= truth[ys, xs] != truth[yd, xd]
    return out
