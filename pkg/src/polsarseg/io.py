"""Raster containers shared by the pipeline stages.

Multi-channel real rasters are stored as a JSON manifest next to a raw
little-endian payload, channel-major then row-major.  Eight-bit rasters
go through Pillow as PNG.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError, SizeMismatchError, UnsupportedVersionError

STACK_VERSION = 1
_DTYPES = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8")}


def write_json(path, doc) -> None:
    """Write ``doc`` with a stable layout so re-runs are byte-identical."""
    text = json.dumps(doc, indent=2, sort_keys=False, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: malformed JSON ({exc})") from exc


def write_stack(path, data, channels, *, dtype="<f4", kind=None, extra=None) -> Path:
    """Serialize a ``(C, H, W)`` real raster.

    ``path`` names the manifest; the payload lands beside it with a
    ``.bin`` suffix.  Returns the payload path.
    """
    path = Path(path)
    data = np.asarray(data)
    if data.ndim != 3:
        raise FormatError(f"stack must be (C, H, W), got shape {data.shape}")
    if len(channels) != data.shape[0]:
        raise FormatError(f"{len(channels)} channel names for {data.shape[0]} channels")
    if dtype not in _DTYPES:
        raise FormatError(f"unsupported stack dtype {dtype!r}")
    payload = path.with_suffix(".bin")
    doc = {
        "version": STACK_VERSION,
        "kind": kind,
        "width": int(data.shape[2]),
        "height": int(data.shape[1]),
        "dtype": dtype,
        "channels": list(channels),
        "payload": payload.name,
    }
    if extra:
        doc.update(extra)
    payload.write_bytes(np.ascontiguousarray(data, dtype=_DTYPES[dtype]).tobytes())
    write_json(path, doc)
    return payload


def read_stack(path):
    """Inverse of :func:`write_stack`; returns ``(data, manifest)``."""
    path = Path(path)
    doc = read_json(path)
    try:
        version = doc["version"]
        width, height = int(doc["width"]), int(doc["height"])
        channels = doc["channels"]
        dtype = _DTYPES[doc["dtype"]]
        payload = path.parent / doc["payload"]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: incomplete stack manifest ({exc})") from exc
    if version != STACK_VERSION:
        raise UnsupportedVersionError(f"{path}: stack version {version}")
    raw = payload.read_bytes()
    expected = len(channels) * width * height * dtype.itemsize
    if len(raw) != expected:
        raise SizeMismatchError(f"{payload}: {len(raw)} bytes, expected {expected}")
    data = np.frombuffer(raw, dtype=dtype).reshape(len(channels), height, width)
    return data.astype(np.float64), doc


def write_png(path, image) -> None:
    """Write an 8-bit grayscale ``(H, W)`` or RGB ``(H, W, 3)`` array."""
    image = np.asarray(image)
    if image.dtype != np.uint8:
        raise FormatError(f"PNG writer expects uint8, got {image.dtype}")
    Image.fromarray(image).save(path, format="PNG")


def write_png_indexed(path, index, palette) -> None:
    """Palette-indexed PNG; ``palette`` is a ``(K, 3)`` uint8 table."""
    index = np.asarray(index, dtype=np.uint8)
    img = Image.fromarray(index)
    img.putpalette(np.asarray(palette, dtype=np.uint8).reshape(-1).tolist())
    img.save(path, format="PNG")


def read_png(path) -> np.ndarray:
    """Read a PNG as uint8; palette images return their index plane."""
    with Image.open(path) as img:
        if img.mode in ("P", "L", "RGB"):
            return np.array(img)
        if img.mode == "RGBA":
            return np.array(img.convert("RGB"))
        return np.array(img.convert("L"))
