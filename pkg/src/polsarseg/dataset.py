"""Tiling, geographic splits, purity filtering and the dataset manifest."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .errors import FormatError, UnsupportedVersionError, ValidationError
from .io import read_json, write_json

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1
SPLIT_NAMES = {1: ("train",), 2: ("train", "test"), 3: ("train", "val", "test")}


@dataclass(frozen=True)
class Tile:
    id: str
    scene: str
    x: int
    y: int
    split: str | None = None
    paths: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DatasetManifest:
    tiles: tuple
    tile_size: int
    stride: int
    split_ratios: tuple
    axis: str = "x"
    n_classes: int | None = None
    class_histogram: dict = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        for t in self.tiles:
            if t.id in seen:
                raise ValidationError(f"duplicate tile id {t.id!r}")
            seen.add(t.id)

    def split_of(self, name):
        return [t for t in self.tiles if t.split == name]

    def split_counts(self):
        return {name: len(self.split_of(name)) for name in split_names(len(self.split_ratios))}


def split_names(n):
    return SPLIT_NAMES.get(n, tuple(f"split{i}" for i in range(n)))


def tile_id(scene, x, y):
    return f"{scene}_x{x:05d}_y{y:05d}"


def tile(rasters, size=512, stride=512, scene="scene"):
    """Grid tiles over aligned rasters (each ``(H, W)`` or ``(H, W, C)``).

    Tiles start at multiples of ``stride`` and must fit entirely; partial
    edge tiles are dropped.  Ordered row-major by origin.
    """
    rasters = list(rasters.values()) if isinstance(rasters, dict) else list(rasters)
    if not rasters:
        raise ValidationError("no rasters to tile")
    dims = {tuple(np.shape(r)[:2]) for r in rasters}
    if len(dims) != 1:
        raise ValidationError(f"misaligned raster dimensions: {sorted(dims)}")
    if size < 1 or stride < 1:
        raise ValidationError(f"tile size and stride must be positive, got {size}, {stride}")
    (h, w), = dims
    if size > min(h, w):
        raise ValidationError(f"tile size {size} exceeds raster {w}x{h}")
    return [Tile(tile_id(scene, x, y), scene, x, y)
            for y in range(0, h - size + 1, stride)
            for x in range(0, w - size + 1, stride)]


def _fractions(ratios):
    out = tuple(Fraction(str(r)) if isinstance(r, float) else Fraction(r) for r in ratios)
    if not out or any(r <= 0 for r in out):
        raise ValidationError(f"split ratios must be positive, got {ratios}")
    return out


def band_edges(n_bands, ratios):
    """Cumulative band boundaries for ``n_bands`` grid bands.

    Boundary ``k`` is ``n * (r_1 + ... + r_k) / sum(r)`` rounded half up, so
    rounding errors never accumulate across splits.
    """
    ratios = _fractions(ratios)
    total = sum(ratios)
    edges, cum = [0], Fraction(0)
    for r in ratios:
        cum += r
        q = n_bands * cum / total
        edges.append(int(q + Fraction(1, 2)))
    return edges


def split_geographic(tiles, ratios=(6, 2, 2), axis="x", tile_size=512, stride=None,
                     n_classes=None):
    """Assign split tags by contiguous bands of tile origins along ``axis``.

    Every tile sharing a band origin shares a split; band counts follow
    :func:`band_edges`.
    """
    if axis not in ("x", "y"):
        raise ValidationError(f"split axis must be 'x' or 'y', got {axis!r}")
    ratios = _fractions(ratios)
    names = split_names(len(ratios))
    origins = sorted({getattr(t, axis) for t in tiles})
    if len(origins) < len(ratios):
        raise ValidationError(
            f"{len(origins)} grid bands along {axis} cannot hold {len(ratios)} splits")
    edges = band_edges(len(origins), ratios)
    tag = {}
    for k, name in enumerate(names):
        band = origins[edges[k]:edges[k + 1]]
        if not band:
            log.warning("split %r receives no grid bands", name)
        for o in band:
            tag[o] = name
    out = tuple(replace(t, split=tag[getattr(t, axis)]) for t in tiles)
    return DatasetManifest(out, tile_size, tile_size if stride is None else stride,
                           tuple(str(r) for r in ratios), axis, n_classes)


def class_histogram(manifest: DatasetManifest, labels, n_classes):
    """Per-split pixel counts per class; ``labels`` maps tile id to its
    label raster."""
    names = split_names(len(manifest.split_ratios))
    hist = {name: np.zeros(n_classes, dtype=np.int64) for name in names}
    for t in manifest.tiles:
        lab = np.asarray(labels[t.id]).reshape(-1)
        if lab.size and int(lab.max()) >= n_classes:
            raise ValidationError(f"tile {t.id}: label {int(lab.max())} >= {n_classes}")
        key = t.split if t.split is not None else "unsplit"
        if key not in hist:
            hist[key] = np.zeros(n_classes, dtype=np.int64)
        hist[key] += np.bincount(lab, minlength=n_classes)
    return {name: [int(v) for v in counts] for name, counts in hist.items()}


def purity(label, class_id):
    lab = np.asarray(label)
    return Fraction(int(np.count_nonzero(lab == class_id)), int(lab.size))


def filter_pure_class(manifest: DatasetManifest, labels, class_id, purity_threshold=1.0,
                      n_classes=None):
    """Drop tiles whose share of ``class_id`` pixels is at least
    ``purity_threshold`` (compared exactly, as fractions)."""
    n_classes = manifest.n_classes if n_classes is None else n_classes
    if n_classes is None:
        raise ValidationError("class count unknown; pass n_classes")
    if not 0 <= class_id < n_classes:
        raise ValidationError(f"unknown class id {class_id} (classes 0..{n_classes - 1})")
    threshold = Fraction(str(purity_threshold))
    if not 0 < threshold <= 1:
        raise ValidationError(f"purity must be in (0, 1], got {purity_threshold}")
    kept = tuple(t for t in manifest.tiles if purity(labels[t.id], class_id) < threshold)
    removed = len(manifest.tiles) - len(kept)
    if removed:
        log.info("purity filter removed %d of %d tiles", removed, len(manifest.tiles))
    if not kept:
        log.warning("no tiles left after the purity filter")
    out = replace(manifest, tiles=kept, n_classes=n_classes)
    return replace(out, class_histogram=class_histogram(out, labels, n_classes))


def manifest_document(manifest: DatasetManifest) -> dict:
    return {
        "version": MANIFEST_VERSION,
        "tile_size": manifest.tile_size,
        "stride": manifest.stride,
        "split_ratios": list(manifest.split_ratios),
        "axis": manifest.axis,
        "n_classes": manifest.n_classes,
        "split_counts": manifest.split_counts(),
        "class_histogram": manifest.class_histogram,
        "tiles": [
            {"id": t.id, "scene": t.scene, "x": t.x, "y": t.y, "split": t.split,
             "paths": dict(sorted(t.paths.items()))}
            for t in manifest.tiles
        ],
    }


def write_manifest(path, manifest: DatasetManifest) -> None:
    write_json(path, manifest_document(manifest))


def read_manifest(path) -> DatasetManifest:
    doc = read_json(path)
    if not isinstance(doc, dict) or "version" not in doc:
        raise FormatError(f"{path}: not a dataset manifest")
    if doc["version"] != MANIFEST_VERSION:
        raise UnsupportedVersionError(f"{path}: manifest version {doc['version']}")
    try:
        tiles = tuple(Tile(d["id"], d["scene"], int(d["x"]), int(d["y"]), d["split"],
                           dict(d["paths"])) for d in doc["tiles"])
        return DatasetManifest(tiles, int(doc["tile_size"]), int(doc["stride"]),
                               tuple(doc["split_ratios"]), doc["axis"], doc["n_classes"],
                               dict(doc["class_histogram"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise FormatError(f"{path}: malformed manifest ({exc})") from exc
