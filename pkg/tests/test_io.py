import json

import numpy as np
import pytest

from polsarseg.errors import FormatError, SizeMismatchError, UnsupportedVersionError
from polsarseg.io import read_json, read_png, read_stack, write_png, write_png_indexed, write_stack


def test_stack_round_trip_f8(tmp_path, rng):
    data = rng.standard_normal((3, 4, 5))
    payload = write_stack(tmp_path / "s.json", data, ["a", "b", "c"], dtype="<f8", kind="test")
    assert payload.stat().st_size == data.size * 8
    back, doc = read_stack(tmp_path / "s.json")
    assert np.array_equal(back, data)
    assert doc["channels"] == ["a", "b", "c"] and (doc["width"], doc["height"]) == (5, 4)


def test_stack_f4_is_rounded(tmp_path, rng):
    data = rng.standard_normal((2, 3, 3))
    write_stack(tmp_path / "s.json", data, ["a", "b"])
    back, _ = read_stack(tmp_path / "s.json")
    assert np.array_equal(back, data.astype(np.float32).astype(np.float64))


def test_stack_errors(tmp_path, rng):
    write_stack(tmp_path / "s.json", rng.standard_normal((2, 3, 3)), ["a", "b"])
    raw = (tmp_path / "s.bin").read_bytes()
    (tmp_path / "s.bin").write_bytes(raw[:-4])
    with pytest.raises(SizeMismatchError):
        read_stack(tmp_path / "s.json")
    doc = read_json(tmp_path / "s.json")
    doc["version"] = 9
    (tmp_path / "s.json").write_text(json.dumps(doc))
    with pytest.raises(UnsupportedVersionError):
        read_stack(tmp_path / "s.json")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(FormatError):
        read_stack(tmp_path / "bad.json")
    with pytest.raises(FormatError):
        write_stack(tmp_path / "x.json", np.zeros((2, 2)), ["a"])


def test_png_round_trips(tmp_path, rng):
    rgb = rng.integers(0, 256, (5, 7, 3), dtype=np.uint8)
    write_png(tmp_path / "a.png", rgb)
    assert np.array_equal(read_png(tmp_path / "a.png"), rgb)
    idx = rng.integers(0, 4, (5, 7), dtype=np.uint8)
    write_png_indexed(tmp_path / "b.png", idx, [[0, 0, 0], [255, 0, 0], [0, 255, 0], [0, 0, 255]])
    assert np.array_equal(read_png(tmp_path / "b.png"), idx)
    with pytest.raises(FormatError):
        write_png(tmp_path / "c.png", rgb.astype(np.float32))
