"""Microwave Vision Data: scattering classes as a compact palette raster.

Default class layout (13 classes): five odd-bounce SPAN tiers, five volume
tiers, one double-bounce class, then 'mixed' and 'other'.  Hue encodes the
mechanism, lightness the SPAN tier.
"""
from __future__ import annotations

import colorsys
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cluster import INVALID, LabelRaster
from .errors import FormatError, SizeMismatchError, ValidationError
from .io import write_json, write_png, write_png_indexed

MAGIC = b"MVD1"
MIXED_THRESHOLD = 0.98
MAX_CLASSES = 255  # class count is stored in one byte
HUE = {"odd": 210.0, "double": 0.0, "volume": 120.0}
SATURATION = 0.7
_TIER_LIGHTNESS = (0.35, 0.75)


@dataclass(frozen=True)
class LegendEntry:
    name: str
    primary: str  # odd | double | volume | mixed | other
    tier: int | None


@dataclass(frozen=True)
class MVDRaster:
    class_index: np.ndarray
    palette: np.ndarray  # (C, 3) uint8
    legend: tuple

    @property
    def c_mvd(self) -> int:
        return len(self.legend)

    @property
    def height(self) -> int:
        return self.class_index.shape[0]

    @property
    def width(self) -> int:
        return self.class_index.shape[1]


def _rgb(hue, lightness, saturation=SATURATION):
    r, g, b = colorsys.hls_to_rgb(hue / 360.0, lightness, saturation)
    return [int(round(255 * c)) for c in (r, g, b)]


def tier_lightness(n):
    """Evenly spaced lightness across ``n`` tiers, darkest first."""
    lo, hi = _TIER_LIGHTNESS
    if n == 1:
        return [0.5 * (lo + hi)]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def build_palette(legend) -> np.ndarray:
    """Palette for a legend: same hue per mechanism, lightness by tier rank."""
    groups = {}
    for i, entry in enumerate(legend):
        if entry.primary in HUE:
            groups.setdefault(entry.primary, []).append(i)
    palette = np.zeros((len(legend), 3), dtype=np.uint8)
    for primary, members in groups.items():
        ordered = sorted(members, key=lambda i: (legend[i].tier or 0, i))
        for light, i in zip(tier_lightness(len(ordered)), ordered):
            palette[i] = _rgb(HUE[primary], light)
    for i, entry in enumerate(legend):
        if entry.primary == "mixed":
            palette[i] = (128, 128, 128)
        elif entry.primary == "other":
            palette[i] = (0, 0, 0)
    return palette


def _source_legend(n_source):
    """Legend entries of the odd/volume/double sub-class layout."""
    n_sub = (n_source - 1) // 2
    if n_source != 2 * n_sub + 1:
        raise ValidationError(f"expected 2*n_sub+1 source classes, got {n_source}")
    return ([LegendEntry(f"odd-bounce tier {i + 1}", "odd", i) for i in range(n_sub)]
            + [LegendEntry(f"volume tier {i + 1}", "volume", i) for i in range(n_sub)]
            + [LegendEntry("double-bounce", "double", 0)])


def recluster(labels: LabelRaster, merge_map=None, ambiguity=None,
              mixed_threshold=MIXED_THRESHOLD) -> MVDRaster:
    """Map sub-classes to MVD classes and append 'mixed' and 'other'.

    ``merge_map`` maps every source class id to a target id; targets must be
    ``0..M-1``.  Without it the source classes carry over unchanged.
    Pixels whose ``ambiguity`` (best/second-best divergence ratio) exceeds
    ``mixed_threshold`` become 'mixed'; invalid pixels become 'other'.
    """
    source = _source_legend(labels.n_classes)
    if merge_map is None:
        merge_map = {i: i for i in range(labels.n_classes)}
    merge_map = {int(k): int(v) for k, v in dict(merge_map).items()}
    unknown = sorted(set(merge_map) - set(range(labels.n_classes)))
    if unknown:
        raise ValidationError(f"merge_map references unknown source classes {unknown}")
    missing = sorted(set(range(labels.n_classes)) - set(merge_map))
    if missing:
        raise ValidationError(f"merge_map does not cover source classes {missing}")
    targets = sorted(set(merge_map.values()))
    if targets != list(range(len(targets))):
        raise ValidationError(f"merge_map targets must be 0..M-1, got {targets}")
    legend = []
    for tgt in targets:
        members = [source[s] for s in sorted(merge_map) if merge_map[s] == tgt]
        kinds = {m.primary for m in members}
        primary = kinds.pop() if len(kinds) == 1 else "mixed"
        tier = min(m.tier for m in members)
        name = members[0].name if len(members) == 1 else f"{primary} group {tgt + 1}"
        legend.append(LegendEntry(name, primary, tier))
    mixed_id, other_id = len(legend), len(legend) + 1
    legend += [LegendEntry("mixed", "mixed", None), LegendEntry("other", "other", None)]
    if len(legend) > MAX_CLASSES:
        raise ValidationError(f"{len(legend)} MVD classes exceed the {MAX_CLASSES} limit")
    lut = np.full(256, other_id, dtype=np.uint8)
    for s, tgt in merge_map.items():
        lut[s] = tgt
    index = lut[labels.label]
    index[~labels.valid] = other_id
    if ambiguity is not None:
        mixed = labels.valid & (np.asarray(ambiguity) > mixed_threshold)
        index[mixed] = mixed_id
    return MVDRaster(index, build_palette(legend), tuple(legend))


def all_other(height, width, n_source=11) -> MVDRaster:
    """An MVD raster with every pixel in 'other' (no valid pixels)."""
    labels = LabelRaster(np.full((height, width), INVALID, dtype=np.uint8),
                         np.zeros((height, width), dtype=bool), n_source)
    return recluster(labels)


def to_rgb(mvd: MVDRaster) -> np.ndarray:
    return mvd.palette[mvd.class_index]


def header_size(n_classes: int) -> int:
    return len(MAGIC) + 5 + 3 * n_classes


def encode(mvd: MVDRaster) -> bytes:
    """Indexed raster bytes: magic, u16 width, u16 height, u8 class count,
    palette, then one class byte per pixel (row-major, little-endian)."""
    if mvd.c_mvd > MAX_CLASSES:
        raise ValidationError(f"{mvd.c_mvd} classes do not fit the one-byte class count")
    if mvd.width > 0xFFFF or mvd.height > 0xFFFF:
        raise ValidationError(f"raster {mvd.width}x{mvd.height} exceeds u16 dimensions")
    head = MAGIC + struct.pack("<HHB", mvd.width, mvd.height, mvd.c_mvd)
    return (head + np.ascontiguousarray(mvd.palette, dtype=np.uint8).tobytes()
            + np.ascontiguousarray(mvd.class_index, dtype=np.uint8).tobytes())


def decode(raw: bytes, legend=None):
    """Parse MVD1 bytes into ``(class_index, palette)``, or an
    :class:`MVDRaster` when ``legend`` is given."""
    if raw[:4] != MAGIC:
        raise FormatError(f"not an MVD1 raster (magic {raw[:4]!r})")
    if len(raw) < header_size(0):
        raise SizeMismatchError("truncated MVD1 header")
    width, height, count = struct.unpack("<HHB", raw[4:9])
    need = header_size(count) + width * height
    if len(raw) != need:
        raise SizeMismatchError(f"MVD1 holds {len(raw)} bytes, expected {need}")
    palette = np.frombuffer(raw[9:9 + 3 * count], dtype=np.uint8).reshape(count, 3).copy()
    index = np.frombuffer(raw[header_size(count):], dtype=np.uint8).reshape(height, width).copy()
    if index.size and int(index.max()) >= count:
        raise FormatError(f"class byte {int(index.max())} >= class count {count}")
    if legend is None:
        return index, palette
    return MVDRaster(index, palette, tuple(legend))


def write_mvd(path, mvd: MVDRaster) -> None:
    Path(path).write_bytes(encode(mvd))


def read_mvd(path, legend=None):
    return decode(Path(path).read_bytes(), legend)


def encode_palette(mvd: MVDRaster, path=None, png_path=None) -> np.ndarray:
    """Per-pixel RGB; optionally also write the MVD1 file and an indexed PNG."""
    if path is not None:
        write_mvd(path, mvd)
    if png_path is not None:
        write_png_indexed(png_path, mvd.class_index, mvd.palette)
    return to_rgb(mvd)


def one_hot(mvd: MVDRaster, dtype=np.float64) -> np.ndarray:
    """``(C, H, W)`` indicator tensor in legend order."""
    return (np.arange(mvd.c_mvd)[:, None, None] == mvd.class_index[None]).astype(dtype)


def legend_document(mvd: MVDRaster) -> dict:
    return {
        "version": 1,
        "classes": [
            {"index": i, "name": e.name, "primary": e.primary, "tier": e.tier,
             "rgb": [int(c) for c in mvd.palette[i]]}
            for i, e in enumerate(mvd.legend)
        ],
    }


def legend_from_document(doc) -> tuple:
    return tuple(LegendEntry(c["name"], c["primary"], c["tier"]) for c in doc["classes"])


def swatch(mvd: MVDRaster, row_height=16, width=64) -> np.ndarray:
    """One solid row of ``row_height`` pixels per class, in legend order."""
    rows = np.repeat(mvd.palette, row_height, axis=0)
    return np.repeat(rows[:, None, :], width, axis=1)


def render_legend(mvd: MVDRaster, json_path=None, swatch_path=None, figure_path=None):
    """Legend document plus swatch raster (and an annotated figure)."""
    doc = legend_document(mvd)
    image = swatch(mvd)
    if json_path is not None:
        write_json(json_path, doc)
    if swatch_path is not None:
        write_png(swatch_path, image)
    if figure_path is not None:
        from .plotting import plot_legend  # matplotlib only when a figure is asked for
        plot_legend(doc, figure_path)
    return doc, image
