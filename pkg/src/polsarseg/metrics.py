"""Confusion matrices and the class-mean segmentation scores derived from them."""
from __future__ import annotations

import csv
import io as _io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cluster import LabelRaster
from .errors import ValidationError
from .io import write_json


@dataclass(frozen=True)
class ConfusionMatrix:
    """``counts[g, p]``: pixels with ground truth ``g`` predicted as ``p``."""

    counts: np.ndarray

    def __post_init__(self):
        c = self.counts
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValidationError(f"confusion matrix must be square, got {c.shape}")
        if np.any(c < 0):
            raise ValidationError("confusion counts must be non-negative")

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other):
        if other.k != self.k:
            raise ValidationError(f"cannot add {self.k}- and {other.k}-class matrices")
        return ConfusionMatrix(self.counts + other.counts)


def _plane(x):
    return x.label if isinstance(x, LabelRaster) else np.asarray(x)


def confusion(pred, gt, k, ignore_index=None) -> ConfusionMatrix:
    """Count ``(gt, pred)`` pairs; pixels whose ground truth equals
    ``ignore_index`` are skipped."""
    p, g = _plane(pred), _plane(gt)
    if p.shape != g.shape:
        raise ValidationError(f"prediction {p.shape} and ground truth {g.shape} differ in shape")
    p = p.reshape(-1).astype(np.int64)
    g = g.reshape(-1).astype(np.int64)
    if ignore_index is not None:
        keep = g != ignore_index
        p, g = p[keep], g[keep]
    for name, a in (("prediction", p), ("ground truth", g)):
        if a.size and (a.min() < 0 or a.max() >= k):
            raise ValidationError(f"{name} label outside 0..{k - 1}")
    counts = np.bincount(g * k + p, minlength=k * k).reshape(k, k)
    return ConfusionMatrix(counts.astype(np.int64))


@dataclass(frozen=True)
class SegmentationScores:
    """Per-class scores (``nan`` where undefined) and their class means."""

    iou: np.ndarray
    acc: np.ndarray
    f1: np.ndarray
    scored: np.ndarray  # classes present in ground truth or prediction
    gt_present: np.ndarray
    miou: float
    macc: float
    mf1: float
    pixel_accuracy: float


def _ratio(num, den):
    out = np.full(num.shape, np.nan)
    ok = den > 0
    out[ok] = num[ok].astype(np.float64) / den[ok].astype(np.float64)
    return out


def _mean(values, mask):
    picked = [float(v) for v in values[mask]]
    return math.fsum(picked) / len(picked) if picked else float("nan")


def metrics(cm: ConfusionMatrix) -> SegmentationScores:
    """IoU = TP/(TP+FP+FN), Acc = TP/(TP+FN), F1 = 2TP/(2TP+FP+FN).

    mIoU and mF1 average over classes seen in ground truth or prediction (a
    predicted-only class scores 0); mAcc averages recall over classes present
    in ground truth.  Classes absent from both are ignored.
    """
    if cm.total == 0:
        raise ValidationError("empty confusion matrix")
    c = cm.counts
    tp = np.diag(c)
    gt = c.sum(axis=1)
    pred = c.sum(axis=0)
    fp, fn = pred - tp, gt - tp
    iou = _ratio(tp, tp + fp + fn)
    acc = _ratio(tp, gt)
    f1 = _ratio(2 * tp, 2 * tp + fp + fn)
    scored = (gt + pred) > 0
    gt_present = gt > 0
    return SegmentationScores(iou, acc, f1, scored, gt_present,
                              _mean(iou, scored), _mean(acc, gt_present), _mean(f1, scored),
                              float(tp.sum()) / float(cm.total))


def report_document(cm: ConfusionMatrix, s: SegmentationScores, names=None) -> dict:
    names = list(names) if names is not None else [f"class{i}" for i in range(cm.k)]
    if len(names) != cm.k:
        raise ValidationError(f"{len(names)} class names for {cm.k} classes")

    def num(v):
        return None if math.isnan(v) else float(v)
    return {
        "version": 1,
        "classes": [
            {"index": i, "name": names[i], "iou": num(s.iou[i]), "acc": num(s.acc[i]),
             "f1": num(s.f1[i]), "gt_pixels": int(cm.counts[i].sum()),
             "pred_pixels": int(cm.counts[:, i].sum())}
            for i in range(cm.k)
        ],
        "mAcc": num(s.macc),
        "mF1": num(s.mf1),
        "mIoU": num(s.miou),
        "pixel_accuracy": num(s.pixel_accuracy),
        "confusion": cm.counts.tolist(),
    }


def _pct(v):
    return "-" if v is None else f"{100.0 * v:.2f}"


def report_table(doc) -> str:
    """Aligned text: per-class IoU columns, then the three class means, all
    in percent."""
    head = [c["name"] for c in doc["classes"]] + ["mAcc", "mF1", "mIoU"]
    row = [_pct(c["iou"]) for c in doc["classes"]] + [_pct(doc[k]) for k in ("mAcc", "mF1", "mIoU")]
    widths = [max(len(a), len(b)) for a, b in zip(head, row)]
    line = lambda cells: "  ".join(c.rjust(w) for c, w in zip(cells, widths))
    return "\n".join([line(head), line(row)]) + "\n"


def report_csv(doc) -> str:
    buf = _io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["index", "name", "iou", "acc", "f1", "gt_pixels", "pred_pixels"])
    for c in doc["classes"]:
        out.writerow([c["index"], c["name"]] + ["" if c[k] is None else repr(c[k])
                                                 for k in ("iou", "acc", "f1")]
                     + [c["gt_pixels"], c["pred_pixels"]])
    for k in ("mAcc", "mF1", "mIoU", "pixel_accuracy"):
        out.writerow(["", k, "" if doc[k] is None else repr(doc[k]), "", "", "", ""])
    return buf.getvalue()


def write_report(out_dir, cm: ConfusionMatrix, names=None, figure=True) -> dict:
    """``report.json``, ``report.txt``, ``report.csv`` and an IoU bar chart."""
    out_dir = Path(out_dir)
    doc = report_document(cm, metrics(cm), names)
    write_json(out_dir / "report.json", doc)
    (out_dir / "report.txt").write_text(report_table(doc), encoding="utf-8")
    (out_dir / "report.csv").write_text(report_csv(doc), encoding="utf-8")
    if figure:
        from .plotting import plot_iou_bars  # matplotlib only when a figure is asked for
        plot_iou_bars(doc, out_dir / "iou.png")
    return doc
