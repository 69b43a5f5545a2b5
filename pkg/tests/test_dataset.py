import json

import numpy as np
import pytest

from polsarseg import dataset as ds
from polsarseg.errors import FormatError, UnsupportedVersionError, ValidationError


def _grid_oracle(w, h, size, stride):
    out = []
    y = 0
    while y + size <= h:
        x = 0
        while x + size <= w:
            out.append((x, y))
            x += stride
        y += stride
    return out


@pytest.mark.parametrize("w, h, size, stride, n", [
    (1024, 1024, 512, 512, 4),
    (1025, 1024, 512, 512, 4),
    (1536, 1024, 512, 256, 15),
    (512, 512, 512, 512, 1),
])
def test_tile_counts(w, h, size, stride, n):
    tiles = ds.tile([np.zeros((h, w)), np.zeros((h, w, 3))], size, stride, "s")
    assert len(tiles) == n
    assert [(t.x, t.y) for t in tiles] == _grid_oracle(w, h, size, stride)


def test_tile_errors():
    with pytest.raises(ValidationError):
        ds.tile([np.zeros((10, 10)), np.zeros((10, 11))], 4)
    with pytest.raises(ValidationError):
        ds.tile([np.zeros((10, 10))], 11)
    with pytest.raises(ValidationError):
        ds.tile([], 4)


def _columns(n_cols, n_rows=2, size=8):
    return [ds.Tile(ds.tile_id("s", x * size, y * size), "s", x * size, y * size)
            for y in range(n_rows) for x in range(n_cols)]


def _split_by_column(manifest, size=8):
    out = {}
    for t in manifest.tiles:
        out.setdefault(t.x // size, set()).add(t.split)
    assert all(len(v) == 1 for v in out.values())
    return [out[c].pop() for c in sorted(out)]


def test_ten_columns_six_two_two():
    m = ds.split_geographic(_columns(10), (6, 2, 2), tile_size=8)
    assert _split_by_column(m) == ["train"] * 6 + ["val"] * 2 + ["test"] * 2


def test_ten_columns_six_four():
    m = ds.split_geographic(_columns(10), (6, 4), tile_size=8)
    assert _split_by_column(m) == ["train"] * 6 + ["test"] * 4
    assert m.split_counts() == {"train": 12, "test": 8}


def _rounding_oracle(n, ratios):
    """Integer-only half-up rounding of cumulative shares."""
    total = sum(ratios)
    edges, cum = [0], 0
    for r in ratios:
        cum += r
        edges.append((2 * n * cum + total) // (2 * total))
    return [b - a for a, b in zip(edges, edges[1:])]


@pytest.mark.parametrize("ratios", [(6, 2, 2), (6, 4), (1, 1, 1), (7, 3), (5, 3, 2)])
def test_band_sizes_match_rounding_oracle(rng, ratios):
    for n in rng.integers(len(ratios), 60, 25):
        m = ds.split_geographic(_columns(int(n), 1), ratios, tile_size=8)
        cols = _split_by_column(m)
        names = ds.split_names(len(ratios))
        assert [cols.count(s) for s in names] == _rounding_oracle(int(n), ratios)
        # contiguous bands in split order
        assert cols == sorted(cols, key=names.index)


def test_split_along_y_and_errors():
    tiles = [ds.Tile(f"t{y}", "s", 0, y * 8) for y in range(5)]
    m = ds.split_geographic(tiles, (3, 2), axis="y", tile_size=8)
    assert [t.split for t in m.tiles] == ["train"] * 3 + ["test"] * 2
    with pytest.raises(ValidationError):
        ds.split_geographic(_columns(2), (6, 2, 2))
    with pytest.raises(ValidationError):
        ds.split_geographic(_columns(4), (6, 0, 2))
    with pytest.raises(ValidationError):
        ds.split_geographic(_columns(4), axis="z")


def test_every_tile_gets_exactly_one_split(rng):
    m = ds.split_geographic(_columns(13, 3), (6, 2, 2), tile_size=8)
    assert all(t.split in ("train", "val", "test") for t in m.tiles)
    assert sum(m.split_counts().values()) == len(m.tiles)


def _water_manifest():
    tiles = [ds.Tile(f"t{i}", "s", i * 10, 0, "train") for i in range(4)]
    labels = {
        "t0": np.zeros((10, 10), int),                        # 100% water
        "t1": np.r_[np.zeros(99, int), [1]].reshape(10, 10),  # 99% water
        "t2": np.ones((10, 10), int),
        "t3": np.arange(100).reshape(10, 10) % 2,
    }
    return ds.DatasetManifest(tuple(tiles), 10, 10, ("6", "4")), labels


def test_purity_filter_thresholds():
    m, labels = _water_manifest()
    kept = ds.filter_pure_class(m, labels, 0, 1.0, n_classes=2)
    assert [t.id for t in kept.tiles] == ["t1", "t2", "t3"]
    assert kept.class_histogram["train"] == [99 + 50, 1 + 100 + 50]
    kept = ds.filter_pure_class(m, labels, 0, 0.99, n_classes=2)
    assert [t.id for t in kept.tiles] == ["t2", "t3"]
    with pytest.raises(ValidationError):
        ds.filter_pure_class(m, labels, 2, n_classes=2)
    with pytest.raises(ValidationError):
        ds.filter_pure_class(m, labels, 0, 1.5, n_classes=2)


def test_purity_filter_matches_enumeration(rng):
    tiles, labels = [], {}
    for i in range(60):
        tid = f"t{i}"
        lab = np.zeros(64, int)
        lab[:int(rng.integers(0, 5))] = 1
        labels[tid] = rng.permutation(lab).reshape(8, 8)
        tiles.append(ds.Tile(tid, "s", i, 0, "train"))
    m = ds.DatasetManifest(tuple(tiles), 8, 8, ("1",), n_classes=2)
    for thr in (1.0, 0.97, 0.95):
        kept = ds.filter_pure_class(m, labels, 0, thr)
        expected = [t.id for t in tiles if np.count_nonzero(labels[t.id] == 0) < thr * 64]
        assert [t.id for t in kept.tiles] == expected
    # a tile with two distinct values is never removed at purity 1.0
    kept = ds.filter_pure_class(m, labels, 0, 1.0)
    assert all(len(np.unique(labels[t.id])) == 1 for t in tiles if t not in kept.tiles)


def test_manifest_round_trip_large(tmp_path):
    tiles = ds.tile([np.zeros((47 * 8, 61 * 8), np.uint8)], 8, 8, "scene")
    assert len(tiles) == 2867
    tiles = tiles[:2866]
    m = ds.split_geographic(tiles, tile_size=8)
    m = ds.DatasetManifest(tuple(ds.Tile(t.id, t.scene, t.x, t.y, t.split,
                                         {"rgb": f"tiles/{t.id}_rgb.png"}) for t in m.tiles),
                           m.tile_size, m.stride, m.split_ratios, m.axis, 13,
                           {"train": [1] * 13})
    ds.write_manifest(tmp_path / "a.json", m)
    back = ds.read_manifest(tmp_path / "a.json")
    assert back == m
    ds.write_manifest(tmp_path / "b.json", back)
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_manifest_errors(tmp_path):
    t = ds.Tile("a", "s", 0, 0)
    with pytest.raises(ValidationError):
        ds.DatasetManifest((t, t), 8, 8, ("1",))
    doc = ds.manifest_document(ds.DatasetManifest((t,), 8, 8, ("1",)))
    doc["tiles"].append(dict(doc["tiles"][0]))
    (tmp_path / "dup.json").write_text(json.dumps(doc))
    with pytest.raises(ValidationError):
        ds.read_manifest(tmp_path / "dup.json")
    doc["version"] = 2
    (tmp_path / "v2.json").write_text(json.dumps(doc))
    with pytest.raises(UnsupportedVersionError):
        ds.read_manifest(tmp_path / "v2.json")
    (tmp_path / "bad.json").write_text(json.dumps({"version": 1, "tiles": [{}]}))
    with pytest.raises(FormatError):
        ds.read_manifest(tmp_path / "bad.json")
