import hashlib
import json
import subprocess
import sys
import time
from argparse import Namespace

import numpy as np
import pytest

from polsarseg import cli
from polsarseg.errors import ValidationError
from polsarseg.io import read_json, read_png, read_stack, write_png
from polsarseg.mvd import read_mvd
from polsarseg.polsar import ScatteringField, write_slc


def run(*argv):
    return cli.main([str(a) for a in argv])


def digest(directory):
    return {p.relative_to(directory).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(directory.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def chain(tmp_path_factory):
    root = tmp_path_factory.mktemp("chain")
    assert run("synth", "--out", root / "synth", "--seed", 5) == 0
    assert run("decompose", "--input", root / "synth" / "scene.slc", "--out", root / "dec") == 0
    assert run("mvd", "--input", root / "dec", "--out", root / "mvd") == 0
    return root


def test_synth_outputs(chain):
    out = chain / "synth"
    for name in ("scene.slc", "truth.png", "truth.json", "truth_counts.csv"):
        assert (out / name).stat().st_size > 0
    truth = read_png(out / "truth.png")
    assert truth.shape == (128, 128) and set(np.unique(truth)) == {0, 1, 2}
    assert read_json(out / "truth.json")["classes"] == ["odd", "double", "volume"]


def test_decompose_outputs(chain):
    out = chain / "dec"
    assert read_png(out / "pauli_rgb.png").shape == (128, 128, 3)
    for kind, n in (("HAA3", 3), ("T9", 9), ("HAAT12", 12)):
        stack, doc = read_stack(out / f"features_{kind}.json")
        assert stack.shape == (n, 128, 128) and doc["dtype"] == "<f4"
    assert (out / "features_HAAT12.bin").stat().st_size == 12 * 128 * 128 * 4
    _, doc = read_stack(out / "coherency.json")
    assert doc["window"] == 3 and doc["looks"] == 9
    assert (out / "h_alpha.png").stat().st_size > 0
    rows = (out / "features_summary.csv").read_text().splitlines()
    assert rows[0] == "stack,channel,min,max,mean" and len(rows) == 1 + 24


def test_mvd_outputs(chain):
    out = chain / "mvd"
    index, palette = read_mvd(out / "mvd.mvd1")
    assert index.shape == (128, 128) and palette.shape == (13, 3)
    legend = read_json(out / "legend.json")
    assert [c["primary"] for c in legend["classes"]][-2:] == ["mixed", "other"]
    for name in ("cluster_model.json", "subclasses.json", "subclasses.u8", "primary.png",
                 "objective.png", "mvd.png", "legend_swatch.png", "legend.png", "classes.csv",
                 "mvd_run.json"):
        assert (out / name).stat().st_size > 0
    assert read_png(out / "mvd.png").shape == (128, 128)
    assert not np.any(index == 12)  # every pixel of the synthetic scene is valid


def test_dataset_and_evaluate(chain, capsys):
    out = chain / "ds"
    assert run("dataset", "--input", chain / "mvd", "--pseudo-color", chain / "dec" / "pauli_rgb.png",
               "--tile-size", 32, "--out", out) == 0
    manifest = read_json(out / "manifest.json")
    assert len(manifest["tiles"]) == 16
    assert manifest["split_counts"] == {"train": 8, "val": 4, "test": 4}
    by_x = {}
    for t in manifest["tiles"]:
        by_x.setdefault(t["x"], set()).add(t["split"])
    assert all(len(v) == 1 for v in by_x.values())
    first = manifest["tiles"][0]["id"]
    assert read_png(out / "tiles" / f"{first}_rgb.png").shape == (32, 32, 3)
    assert read_mvd(out / "tiles" / f"{first}.mvd1")[0].shape == (32, 32)

    gt = chain / "gt"
    gt.mkdir()
    write_png(gt / "scene.png", read_png(chain / "synth" / "truth.png"))
    capsys.readouterr()
    assert run("evaluate", "--pred", gt, "--gt", gt, "--names", "odd,double,volume",
               "--out", chain / "eval") == 0
    table = capsys.readouterr().out
    assert table.split()[:6] == ["odd", "double", "volume", "mAcc", "mF1", "mIoU"]
    assert table.split()[-1] == "100.00"
    assert read_json(chain / "eval" / "report.json")["mIoU"] == 1.0


def test_evaluate_two_class_and_mvd_inputs(tmp_path, capsys):
    (tmp_path / "p").mkdir()
    (tmp_path / "g").mkdir()
    write_png(tmp_path / "g" / "a.png", np.array([[0, 0, 0, 0], [1, 1, 1, 1]], np.uint8))
    write_png(tmp_path / "p" / "a.png", np.array([[0, 0, 0, 1], [1, 1, 1, 0]], np.uint8))
    assert run("evaluate", "--pred", tmp_path / "p", "--gt", tmp_path / "g",
               "--out", tmp_path / "o") == 0
    doc = read_json(tmp_path / "o" / "report.json")
    assert (doc["mIoU"], doc["mAcc"], doc["mF1"]) == (0.6, 0.75, 0.75)


def test_evaluate_errors(tmp_path):
    (tmp_path / "empty").mkdir()
    assert run("evaluate", "--pred", tmp_path / "empty", "--gt", tmp_path / "empty",
               "--out", tmp_path / "o") == cli.EXIT_VALIDATION
    assert run("evaluate", "--pred", tmp_path / "nope", "--gt", tmp_path / "empty",
               "--out", tmp_path / "o") == cli.EXIT_IO


def test_fuse_demo_synthetic_is_fast(tmp_path):
    started = time.perf_counter()
    assert run("fuse-demo", "--out", tmp_path) == 0
    assert time.perf_counter() - started < 2.0
    for name in ("v_d.png", "prompts.png", "scores.json", "dense_prompts.json", "weights.json",
                 "scores.csv"):
        assert (tmp_path / name).stat().st_size > 0
    for i in range(6):
        assert read_png(tmp_path / f"v_sd_{i}.png").shape == (16, 16)
        assert read_png(tmp_path / f"score_{i}.png").shape == (64, 64)
    scores, _ = read_stack(tmp_path / "scores.json")
    assert scores.shape == (6, 64, 64)


def test_fuse_demo_on_pipeline_output(chain, tmp_path):
    assert run("fuse-demo", "--input", chain / "mvd", "--pseudo-color",
               chain / "dec" / "pauli_rgb.png", "--grid", 8, "--channels", 8, "--tokens", 3,
               "--tile-x", 40, "--tile-y", 20, "--out", tmp_path) == 0
    assert read_stack(tmp_path / "scores.json")[0].shape == (3, 32, 32)
    assert run("fuse-demo", "--input", chain / "mvd", "--pseudo-color",
               chain / "dec" / "pauli_rgb.png", "--tile-x", 100, "--out", tmp_path) == \
        cli.EXIT_VALIDATION


def test_zero_scene_becomes_other(tmp_path):
    z = np.zeros((16, 16), np.complex64)
    write_slc(tmp_path / "z.slc", ScatteringField(z, z, z))
    assert run("decompose", "--input", tmp_path / "z.slc", "--out", tmp_path / "d") == 0
    assert not read_png(tmp_path / "d" / "pauli_rgb.png").any()
    assert run("mvd", "--input", tmp_path / "d", "--out", tmp_path / "m") == 0
    index, _ = read_mvd(tmp_path / "m" / "mvd.mvd1")
    assert np.all(index == 12)


def test_mvd_single_cluster(chain, tmp_path):
    assert run("mvd", "--input", chain / "dec", "--k", 1, "--out", tmp_path) == 0
    assert read_json(tmp_path / "cluster_model.json")["k"] == 1


def test_exit_codes(tmp_path):
    assert run("decompose", "--input", tmp_path / "missing.slc", "--out", tmp_path) == cli.EXIT_IO
    assert run("synth", "--width", 0, "--out", tmp_path) == cli.EXIT_VALIDATION
    (tmp_path / "bad.slc").write_bytes(b"PSLC1 4 4\n" + b"\0" * 10)
    assert run("decompose", "--input", tmp_path / "bad.slc", "--out", tmp_path) == \
        cli.EXIT_VALIDATION
    a = np.ones((8, 8), np.complex64)
    b = a.copy()
    b[2, 3] = np.nan
    write_slc(tmp_path / "nan.slc", ScatteringField(a, b, a))
    assert run("decompose", "--input", tmp_path / "nan.slc", "--out", tmp_path) == cli.EXIT_NUMERIC
    assert run("decompose", "--input", tmp_path / "nan.slc", "--window", 2) == cli.EXIT_VALIDATION


def _args(**kw):
    base = {name: None for name in cli._FIELDS}
    base["config"] = None
    base.update(kw)
    return Namespace(**base)


def test_config_precedence(tmp_path, monkeypatch):
    monkeypatch.delenv(cli.THREADS_ENV, raising=False)
    assert cli.resolve_config(_args()).threads == 1
    monkeypatch.setenv(cli.THREADS_ENV, "3")
    assert cli.resolve_config(_args()).threads == 3
    assert cli.resolve_config(_args(threads=2)).threads == 2
    (tmp_path / "c.json").write_text(json.dumps({"threads": 5, "window": 5, "ratios": [6, 4]}))
    cfg = cli.resolve_config(_args(config=str(tmp_path / "c.json")))
    assert (cfg.threads, cfg.window, cfg.ratios) == (5, 5, (6, 4))
    cfg = cli.resolve_config(_args(config=str(tmp_path / "c.json"), window=7))
    assert cfg.window == 7
    monkeypatch.setenv(cli.THREADS_ENV, "many")
    with pytest.raises(ValidationError):
        cli.resolve_config(_args())
    (tmp_path / "u.json").write_text(json.dumps({"colour": 1}))
    with pytest.raises(ValidationError):
        cli.resolve_config(_args(config=str(tmp_path / "u.json")))


def test_config_file_drives_command(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"width": 20, "height": 12, "seed": 9}))
    assert run("synth", "--config", tmp_path / "c.json", "--out", tmp_path / "s") == 0
    assert read_png(tmp_path / "s" / "truth.png").shape == (12, 20)


def test_threads_do_not_change_output(chain, tmp_path, monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "4")
    assert run("decompose", "--input", chain / "synth" / "scene.slc", "--out", tmp_path) == 0
    assert digest(tmp_path) == digest(chain / "dec")


@pytest.mark.parametrize("command", ["synth", "decompose", "mvd", "fuse-demo"])
def test_rerun_is_byte_identical(chain, tmp_path, command):
    extra = {"synth": ["--seed", 5], "decompose": ["--input", chain / "synth" / "scene.slc"],
             "mvd": ["--input", chain / "dec"], "fuse-demo": ["--grid", 8]}[command]
    assert run(command, *extra, "--out", tmp_path / "a") == 0
    assert run(command, *extra, "--out", tmp_path / "b") == 0
    assert digest(tmp_path / "a") == digest(tmp_path / "b")


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "polsarseg.cli", "--help"], capture_output=True,
                         text=True, check=True)
    for command in cli.COMMANDS:
        assert command in res.stdout
