"""Command-line entry point: ``polsarseg <command> [options]``.

Commands: ``synth``, ``decompose``, ``mvd``, ``dataset``, ``fuse-demo`` and
``evaluate``.  Option values resolve as command-line flag, then ``--config``
JSON file, then built-in default (the thread count also consults
``POLSARSEG_THREADS`` when no flag is given).  Exit codes: 2 for I/O errors,
3 for invalid input, 4 for numeric failures.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import cluster, dataset, mvd
from .eigen import (EIGEN_CHANNELS, canonical_kind, decompose, eigen_from_stack, eigen_to_stack,
                    feature_stack, reassemble_t9)
from .errors import NumericError, PolsarError, ValidationError
from .fusion import KernelConfig, init_weights, run_pipeline, visualize_prompts, write_weights
from .io import (read_json, read_png, read_stack, write_json, write_png, write_png_indexed,
                 write_stack)
from .metrics import ConfusionMatrix, confusion, write_report
from .plotting import plot_h_alpha, plot_objective, plot_prompt_maps
from .polsar import CoherencyField, coherency, load_slc, pauli_rgb, pauli_vector, span, write_slc
from .synth import MECHANISMS, default_regions, regions_from_json, regions_to_json, synth_scene

log = logging.getLogger("polsarseg")

THREADS_ENV = "POLSARSEG_THREADS"
EXIT_IO, EXIT_VALIDATION, EXIT_NUMERIC = 2, 3, 4


@dataclass
class PipelineConfig:
    seed: int = 0
    threads: int = 1
    out: str = "out"
    # synth
    width: int = 128
    height: int = 128
    snr_db: float = 20.0
    regions: list | None = None
    # decompose
    input: str | None = None
    window: int = 3
    features: tuple = ("HAA3", "T9", "HAAT12")
    clip_lo: float = 2.0
    clip_hi: float = 98.0
    # mvd
    k: int = 8
    max_iter: int = 50
    rel_tol: float = 1e-6
    mixed_threshold: float = 0.98
    n_sub: int = 5
    # dataset
    pseudo_color: str | None = None
    mvd: str | None = None
    labels: str | None = None
    tile_size: int = 512
    stride: int | None = None
    ratios: tuple = (6, 2, 2)
    split_axis: str = "x"
    purity_class: int | None = None
    purity: float = 1.0
    scene: str = "scene"
    # fuse-demo
    channels: int = 32
    grid: int = 16
    tokens: int = 6
    tile_x: int = 0
    tile_y: int = 0
    # evaluate
    pred: str | None = None
    gt: str | None = None
    classes: int | None = None
    names: tuple | None = None
    ignore_index: int | None = 255

    def validate(self):
        checks = [
            (self.threads >= 1, "threads must be >= 1"),
            (self.width >= 1 and self.height >= 1, "scene size must be positive"),
            (self.window >= 1 and self.window % 2 == 1, "window must be odd and >= 1"),
            (0.0 <= self.clip_lo < self.clip_hi <= 100.0, "need 0 <= clip_lo < clip_hi <= 100"),
            (1 <= self.k <= 254, "k must be in 1..254"),
            (self.max_iter >= 1, "max_iter must be >= 1"),
            (self.rel_tol >= 0.0, "rel_tol must be >= 0"),
            (0.0 < self.mixed_threshold <= 1.0, "mixed_threshold must be in (0, 1]"),
            (1 <= self.n_sub <= 100, "n_sub must be in 1..100"),
            (self.tile_size >= 1, "tile_size must be >= 1"),
            (self.stride is None or self.stride >= 1, "stride must be >= 1"),
            (len(self.ratios) >= 1 and all(r > 0 for r in self.ratios), "ratios must be positive"),
            (self.split_axis in ("x", "y"), "split_axis must be x or y"),
            (0.0 < self.purity <= 1.0, "purity must be in (0, 1]"),
            (self.channels >= 1 and self.grid >= 1 and self.tokens >= 1,
             "channels, grid and tokens must be >= 1"),
            (self.tile_x >= 0 and self.tile_y >= 0, "tile origin must be non-negative"),
        ]
        for ok, message in checks:
            if not ok:
                raise ValidationError(f"config: {message}")
        return self


_FIELDS = {f.name for f in fields(PipelineConfig)}


def _csv_list(kind):
    def parse(text):
        try:
            return tuple(kind(v) for v in text.split(",") if v.strip())
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc
    return parse


def resolve_config(args) -> PipelineConfig:
    """Merge defaults, the optional JSON config file and explicit flags."""
    values = {}
    if args.config:
        doc = read_json(args.config)
        if not isinstance(doc, dict):
            raise ValidationError(f"{args.config}: config must be a JSON object")
        unknown = sorted(set(doc) - _FIELDS)
        if unknown:
            raise ValidationError(f"{args.config}: unknown config keys {unknown}")
        values.update(doc)
    if getattr(args, "threads", None) is None and "threads" not in values:
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                values["threads"] = int(env)
            except ValueError as exc:
                raise ValidationError(f"{THREADS_ENV}={env!r} is not an integer") from exc
    for name in _FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    for name in ("features", "ratios", "names"):
        if isinstance(values.get(name), list):
            values[name] = tuple(values[name])
    try:
        cfg = PipelineConfig(**values)
    except TypeError as exc:
        raise ValidationError(f"config: {exc}") from exc
    return cfg.validate()


def _out_dir(cfg) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(v):
    return repr(float(v))


# commands ----------------------------------------------------------------

def cmd_synth(cfg: PipelineConfig):
    out = _out_dir(cfg)
    if cfg.regions is not None:
        regions = regions_from_json(cfg.regions)
    else:
        regions = default_regions(cfg.width, cfg.height)
    scene, truth = synth_scene(cfg.width, cfg.height, regions, cfg.snr_db, cfg.seed)
    write_slc(out / "scene.slc", scene)
    write_png(out / "truth.png", truth)
    write_json(out / "truth.json", {
        "version": 1, "width": cfg.width, "height": cfg.height, "snr_db": cfg.snr_db,
        "seed": cfg.seed, "classes": list(MECHANISMS), "none": 255,
        "regions": regions_to_json(regions),
    })
    counts = np.bincount(truth.reshape(-1), minlength=256)
    _write_rows(out / "truth_counts.csv", ["index", "mechanism", "pixels"],
                [[i, m, int(counts[i])] for i, m in enumerate(MECHANISMS)]
                + [[255, "none", int(counts[255])]])
    log.info("synth: %dx%d scene with %d regions -> %s", cfg.width, cfg.height, len(regions), out)


def cmd_decompose(cfg: PipelineConfig):
    if not cfg.input:
        raise ValidationError("decompose needs --input (an SLC file)")
    out = _out_dir(cfg)
    scene = load_slc(cfg.input)
    pauli = pauli_vector(scene)
    write_png(out / "pauli_rgb.png", pauli_rgb(pauli, cfg.clip_lo, cfg.clip_hi))
    coh = coherency(pauli, cfg.window)
    eig = decompose(coh, threads=cfg.threads)
    t9, t9_names = feature_stack(coh, eig, "T9")
    write_stack(out / "coherency.json", t9, t9_names, dtype="<f8", kind="coherency",
                extra={"window": cfg.window, "looks": coh.looks})
    write_stack(out / "eigen.json", eigen_to_stack(eig), EIGEN_CHANNELS, dtype="<f8", kind="eigen")
    rows = []
    for kind in dict.fromkeys(canonical_kind(k) for k in cfg.features):
        stack, names = feature_stack(coh, eig, kind)
        write_stack(out / f"features_{kind}.json", stack, names, dtype="<f4", kind=kind)
        for name, plane in zip(names, stack):
            rows.append([kind, name, _fmt(plane.min()), _fmt(plane.max()), _fmt(plane.mean())])
    _write_rows(out / "features_summary.csv", ["stack", "channel", "min", "max", "mean"], rows)
    plot_h_alpha(eig.entropy, eig.alpha, eig.valid, out / "h_alpha.png")
    log.info("decompose: %dx%d, %d valid pixels -> %s", scene.width, scene.height,
             int(eig.valid.sum()), out)


def _find(path_or_dir, name):
    p = Path(path_or_dir)
    return p / name if p.is_dir() else p


def cmd_mvd(cfg: PipelineConfig):
    if not cfg.input:
        raise ValidationError("mvd needs --input (a decompose output directory)")
    src = Path(cfg.input)
    t9, t9_doc = read_stack(src / "coherency.json")
    eig_stack, _ = read_stack(src / "eigen.json")
    coh = CoherencyField(reassemble_t9(t9), looks=int(t9_doc.get("looks", 1)))
    eig = eigen_from_stack(eig_stack)
    out = _out_dir(cfg)
    h, w = eig.valid.shape
    if not eig.valid.any():
        log.warning("mvd: no valid pixels; every pixel becomes 'other'")
        raster = mvd.all_other(h, w, 2 * cfg.n_sub + 1)
        sub = None
    else:
        init = cluster.init_zones(eig) if cfg.k == 8 else cluster.init_alpha_quantiles(eig, cfg.k)
        model, labels = cluster.wishart_iterate(coh, init, cfg.max_iter, cfg.rel_tol)
        model = cluster.classify_primary(model, eig, labels)
        sub = cluster.subclass_by_span(labels, model, span(coh), cfg.n_sub)
        ambiguity = cluster.ambiguity_ratio(coh, model, labels)
        raster = mvd.recluster(sub, ambiguity=ambiguity, mixed_threshold=cfg.mixed_threshold)
        cluster.write_model(out / "cluster_model.json", model)
        cluster.write_labels(out / "subclasses.json", sub)
        write_png(out / "primary.png", cluster.primary_raster(model, labels))
        plot_objective(model.history, out / "objective.png")
    mvd.encode_palette(raster, out / "mvd.mvd1", out / "mvd.png")
    mvd.render_legend(raster, out / "legend.json", out / "legend_swatch.png", out / "legend.png")
    counts = np.bincount(raster.class_index.reshape(-1), minlength=raster.c_mvd)
    _write_rows(out / "classes.csv", ["index", "name", "primary", "tier", "pixels"],
                [[i, e.name, e.primary, "" if e.tier is None else e.tier, int(counts[i])]
                 for i, e in enumerate(raster.legend)])
    write_json(out / "mvd_run.json", {"version": 1, "k": cfg.k, "max_iter": cfg.max_iter,
                                      "rel_tol": cfg.rel_tol, "n_sub": cfg.n_sub,
                                      "mixed_threshold": cfg.mixed_threshold,
                                      "c_mvd": raster.c_mvd})
    log.info("mvd: %d classes, %d 'other', %d 'mixed' pixels -> %s", raster.c_mvd,
             int(counts[-1]), int(counts[-2]), out)


def _load_pair(cfg, need_labels=False):
    """Pseudo-color raster, MVD raster and legend from flags or ``--input``."""
    rgb_path = cfg.pseudo_color or (cfg.input and _find(cfg.input, "pauli_rgb.png"))
    mvd_path = cfg.mvd or (cfg.input and _find(cfg.input, "mvd.mvd1"))
    if not rgb_path or not mvd_path:
        raise ValidationError("need --pseudo-color and --mvd (or --input with both files)")
    rgb = read_png(rgb_path)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValidationError(f"{rgb_path}: pseudo-color image must be RGB")
    legend_path = Path(mvd_path).with_name("legend.json")
    legend = mvd.legend_from_document(read_json(legend_path)) if legend_path.exists() else None
    index, palette = mvd.read_mvd(mvd_path)
    if rgb.shape[:2] != index.shape:
        raise ValidationError(f"misaligned pair: pseudo-color {rgb.shape[1]}x{rgb.shape[0]}, "
                              f"MVD {index.shape[1]}x{index.shape[0]}")
    return rgb, index, palette, legend


def cmd_dataset(cfg: PipelineConfig):
    rgb, index, palette, legend = _load_pair(cfg)
    if cfg.labels:
        labels = read_png(cfg.labels)
        if labels.ndim != 2:
            raise ValidationError(f"{cfg.labels}: label raster must be single-channel")
        n_classes = int(labels.max()) + 1 if cfg.classes is None else cfg.classes
    else:
        labels, n_classes = index, palette.shape[0]
    if labels.shape != index.shape:
        raise ValidationError("label raster is not aligned with the MVD raster")
    size = cfg.tile_size
    stride = cfg.stride or size
    tiles = dataset.tile([rgb, index, labels], size, stride, cfg.scene)
    manifest = dataset.split_geographic(tiles, cfg.ratios, cfg.split_axis, size, stride, n_classes)
    crop = lambda a, t: a[t.y:t.y + size, t.x:t.x + size]
    by_id = {t.id: crop(labels, t) for t in manifest.tiles}
    if cfg.purity_class is not None:
        manifest = dataset.filter_pure_class(manifest, by_id, cfg.purity_class, cfg.purity)
    else:
        manifest = replace(manifest, class_histogram=dataset.class_histogram(manifest, by_id,
                                                                             n_classes))
    out = _out_dir(cfg)
    tile_dir = out / "tiles"
    tile_dir.mkdir(exist_ok=True)
    legend = legend or tuple(None for _ in range(palette.shape[0]))
    written = []
    for t in manifest.tiles:
        paths = {"pseudo_color": f"tiles/{t.id}_rgb.png", "mvd": f"tiles/{t.id}.mvd1",
                 "label": f"tiles/{t.id}_label.png"}
        write_png(out / paths["pseudo_color"], np.ascontiguousarray(crop(rgb, t)))
        tile_mvd = mvd.MVDRaster(np.ascontiguousarray(crop(index, t)), palette, legend)
        mvd.write_mvd(out / paths["mvd"], tile_mvd)
        if cfg.labels:
            write_png(out / paths["label"], np.ascontiguousarray(crop(labels, t)))
        else:
            write_png_indexed(out / paths["label"], crop(labels, t), palette)
        written.append(replace(t, paths=paths))
    manifest = replace(manifest, tiles=tuple(written))
    dataset.write_manifest(out / "manifest.json", manifest)
    _write_rows(out / "tiles.csv", ["id", "scene", "x", "y", "split"],
                [[t.id, t.scene, t.x, t.y, t.split] for t in manifest.tiles])
    if not manifest.tiles:
        log.warning("dataset: manifest is empty after filtering")
    log.info("dataset: %s -> %s", manifest.split_counts(), out)


def _synthetic_pair(cfg, side):
    """A three-region scene pushed through decompose and mvd in memory."""
    scene, _ = synth_scene(side, side, None, cfg.snr_db, cfg.seed)
    pauli = pauli_vector(scene)
    rgb = pauli_rgb(pauli, cfg.clip_lo, cfg.clip_hi)
    coh = coherency(pauli, cfg.window)
    eig = decompose(coh)
    model, labels = cluster.wishart_iterate(coh, cluster.init_zones(eig), cfg.max_iter, cfg.rel_tol)
    model = cluster.classify_primary(model, eig, labels)
    sub = cluster.subclass_by_span(labels, model, span(coh), cfg.n_sub)
    raster = mvd.recluster(sub, ambiguity=cluster.ambiguity_ratio(coh, model, labels),
                           mixed_threshold=cfg.mixed_threshold)
    return rgb, raster.class_index, raster.palette


def _to_u8(img):
    return np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def cmd_fuse_demo(cfg: PipelineConfig):
    side = 4 * cfg.grid
    if cfg.input or cfg.pseudo_color or cfg.mvd:
        rgb, index, palette, _ = _load_pair(cfg)
    else:
        rgb, index, palette = _synthetic_pair(cfg, side)
    y0, x0 = cfg.tile_y, cfg.tile_x
    if y0 + side > rgb.shape[0] or x0 + side > rgb.shape[1]:
        raise ValidationError(f"a {side}x{side} tile at ({x0}, {y0}) does not fit the "
                              f"{rgb.shape[1]}x{rgb.shape[0]} input")
    rgb = rgb[y0:y0 + side, x0:x0 + side].astype(np.float64).transpose(2, 0, 1) / 255.0
    index = index[y0:y0 + side, x0:x0 + side]
    c_mvd = palette.shape[0]
    onehot = (np.arange(c_mvd)[:, None, None] == index[None]).astype(np.float64)
    kcfg = KernelConfig(c=cfg.channels, h=cfg.grid, w=cfg.grid, n=cfg.tokens, c_mvd=c_mvd)
    weights = init_weights(kcfg, cfg.seed)
    res = run_pipeline(rgb, onehot, weights)
    out = _out_dir(cfg)
    v_d, v_sd = visualize_prompts(res.level2)
    write_png(out / "v_d.png", _to_u8(v_d))
    for i, m in enumerate(v_sd):
        write_png(out / f"v_sd_{i}.png", _to_u8(m))
    scores = res.scores.data
    for i, m in enumerate(scores):
        lo, hi = m.min(), m.max()
        write_png(out / f"score_{i}.png", _to_u8((m - lo) / (hi - lo) if hi > lo else 0 * m))
    write_stack(out / "scores.json", scores, [f"token{i}" for i in range(len(scores))],
                dtype="<f4", kind="score-maps")
    write_stack(out / "dense_prompts.json", res.level2.dense.data.transpose(2, 0, 1),
                [f"c{i}" for i in range(kcfg.c)], dtype="<f4", kind="dense-prompts")
    write_weights(out / "weights.json", weights)
    plot_prompt_maps(v_d, v_sd, out / "prompts.png")
    _write_rows(out / "scores.csv", ["token", "min", "max", "mean"],
                [[i, _fmt(m.min()), _fmt(m.max()), _fmt(m.mean())] for i, m in enumerate(scores)])
    log.info("fuse-demo: %d score maps of %dx%d -> %s", scores.shape[0], side, side, out)


def _read_label_dir(path):
    path = Path(path)
    if not path.is_dir():
        raise FileNotFoundError(f"{path}: not a directory")
    out = {}
    for f in sorted(path.iterdir()):
        if f.suffix == ".png":
            img = read_png(f)
            if img.ndim != 2:
                continue  # color previews are not label rasters
            out[f.stem] = img
        elif f.suffix == ".mvd1":
            out[f.stem] = mvd.read_mvd(f)[0]
    return out


def cmd_evaluate(cfg: PipelineConfig):
    if not cfg.pred or not cfg.gt:
        raise ValidationError("evaluate needs --pred and --gt directories")
    pred, gt = _read_label_dir(cfg.pred), _read_label_dir(cfg.gt)
    common = sorted(set(pred) & set(gt))
    if not common:
        raise ValidationError(f"no label rasters shared by {cfg.pred} and {cfg.gt}")
    for name in common:
        if pred[name].shape != gt[name].shape:
            raise ValidationError(f"{name}: prediction {pred[name].shape} and ground truth "
                                  f"{gt[name].shape} are misaligned")
    k = cfg.classes
    if k is None:
        top = 0
        for name in common:
            g = gt[name][gt[name] != cfg.ignore_index] if cfg.ignore_index is not None else gt[name]
            top = max(top, int(g.max()) + 1 if g.size else 0, int(pred[name].max()) + 1)
        k = top
    cm = ConfusionMatrix(np.zeros((k, k), dtype=np.int64))
    for name in common:
        p, g = pred[name], gt[name]
        if cfg.ignore_index is not None:
            keep = g != cfg.ignore_index
            p, g = p[keep], g[keep]
        cm = cm + confusion(p, g, k)
    out = _out_dir(cfg)
    doc = write_report(out, cm, cfg.names)
    sys.stdout.write(Path(out / "report.txt").read_text(encoding="utf-8"))
    log.info("evaluate: %d raster pairs, mIoU %.4f -> %s", len(common), doc["mIoU"] or 0.0, out)


COMMANDS = {
    "synth": cmd_synth,
    "decompose": cmd_decompose,
    "mvd": cmd_mvd,
    "dataset": cmd_dataset,
    "fuse-demo": cmd_fuse_demo,
    "evaluate": cmd_evaluate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--config", help="JSON file with option values")
    g.add_argument("--seed", type=int)
    g.add_argument("--threads", type=int, help=f"worker threads (else ${THREADS_ENV})")
    g.add_argument("--out", help="output directory (default: out)")
    g.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="polsarseg",
                                description="Polarimetric SAR segmentation toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="synthetic SLC scene + truth raster")
    s.add_argument("--width", type=int)
    s.add_argument("--height", type=int)
    s.add_argument("--snr-db", type=float, dest="snr_db")

    s = sub.add_parser("decompose", parents=[common], help="Pauli RGB, coherency, eigen features")
    s.add_argument("--input", help="SLC file")
    s.add_argument("--window", type=int, help="multilook window (odd)")
    s.add_argument("--features", type=_csv_list(str), help="stacks, e.g. HAA3,T9,HAAT12")
    s.add_argument("--clip-lo", type=float, dest="clip_lo")
    s.add_argument("--clip-hi", type=float, dest="clip_hi")

    s = sub.add_parser("mvd", parents=[common], help="clustering and MVD raster")
    s.add_argument("--input", help="decompose output directory")
    s.add_argument("--k", type=int, help="cluster count (8 uses the entropy/alpha zones)")
    s.add_argument("--max-iter", type=int, dest="max_iter")
    s.add_argument("--rel-tol", type=float, dest="rel_tol")
    s.add_argument("--mixed-threshold", type=float, dest="mixed_threshold")
    s.add_argument("--n-sub", type=int, dest="n_sub", help="SPAN tiers per mechanism")

    s = sub.add_parser("dataset", parents=[common], help="tiles, splits and manifest")
    s.add_argument("--input", help="directory holding pauli_rgb.png and mvd.mvd1")
    s.add_argument("--pseudo-color", dest="pseudo_color")
    s.add_argument("--mvd")
    s.add_argument("--labels", help="single-channel label PNG (default: MVD classes)")
    s.add_argument("--classes", type=int, help="label class count")
    s.add_argument("--scene")
    s.add_argument("--tile-size", type=int, dest="tile_size")
    s.add_argument("--stride", type=int)
    s.add_argument("--ratios", type=_csv_list(float), help="e.g. 6,2,2 or 6,4")
    s.add_argument("--split-axis", choices=("x", "y"), dest="split_axis")
    s.add_argument("--purity-class", type=int, dest="purity_class")
    s.add_argument("--purity", type=float)

    s = sub.add_parser("fuse-demo", parents=[common], help="fusion kernel on one tile pair")
    s.add_argument("--input", help="directory holding pauli_rgb.png and mvd.mvd1")
    s.add_argument("--pseudo-color", dest="pseudo_color")
    s.add_argument("--mvd")
    s.add_argument("--channels", type=int)
    s.add_argument("--grid", type=int, help="feature grid side (tile side is 4x)")
    s.add_argument("--tokens", type=int, help="sparse prompt count")
    s.add_argument("--tile-x", type=int, dest="tile_x")
    s.add_argument("--tile-y", type=int, dest="tile_y")

    s = sub.add_parser("evaluate", parents=[common], help="confusion matrix and scores")
    s.add_argument("--pred", help="directory of predicted label rasters")
    s.add_argument("--gt", help="directory of ground-truth label rasters")
    s.add_argument("--classes", type=int)
    s.add_argument("--names", type=_csv_list(str))
    s.add_argument("--ignore-index", type=int, dest="ignore_index")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = time.perf_counter()
    try:
        cfg = resolve_config(args)
        COMMANDS[args.command](cfg)
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO
    except NumericError as exc:
        log.error("numeric failure: %s", exc)
        return EXIT_NUMERIC
    except (ValidationError, PolsarError) as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    log.info("%s finished in %.2f s", args.command, time.perf_counter() - started)
    return 0


if __name__ == "__main__":
    sys.exit(main())
