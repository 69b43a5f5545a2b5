"""Unsupervised scattering-mechanism classification.

Complex-Wishart k-means over coherency matrices, initialized from the
eight-zone entropy/alpha plane, followed by per-cluster primary typing
(odd / double / volume) and SPAN-quantile sub-classing.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .eigen import EigenFeatures
from .errors import FormatError, NumericError, ValidationError
from .io import read_json, write_json
from .polsar import CoherencyField, SpanField

log = logging.getLogger(__name__)

INVALID = 255
PRIMARY_TYPES = ("odd", "double", "volume")
ODD_MAX_ALPHA = 42.5
DOUBLE_MIN_ALPHA = 47.5
CENTER_EPS = 1e-6

ZONE_NAMES = (
    "low-entropy surface",
    "low-entropy dipole",
    "low-entropy multiple",
    "medium-entropy surface",
    "medium-entropy vegetation",
    "medium-entropy multiple",
    "high-entropy vegetation",
    "high-entropy multiple",
)


@dataclass(frozen=True)
class LabelRaster:
    """Small-integer class ids; invalid pixels carry :data:`INVALID`."""

    label: np.ndarray
    valid: np.ndarray
    n_classes: int
    names: tuple = ()

    def __post_init__(self):
        if self.label.shape != self.valid.shape:
            raise ValidationError("label and validity rasters differ in shape")
        if self.n_classes > INVALID:
            raise ValidationError(f"at most {INVALID} classes fit an 8-bit raster")
        live = self.label[self.valid]
        if live.size and int(live.max()) >= self.n_classes:
            raise ValidationError(f"label {int(live.max())} >= class count {self.n_classes}")

    @property
    def height(self) -> int:
        return self.label.shape[0]

    @property
    def width(self) -> int:
        return self.label.shape[1]


@dataclass
class ClusterModel:
    centers: np.ndarray
    counts: np.ndarray
    objective: float
    eps: float
    history: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    primary_type: list | None = None

    @property
    def k(self) -> int:
        return int(self.centers.shape[0])


def init_zones(eig: EigenFeatures) -> LabelRaster:
    """Assign each valid pixel to one of eight entropy/alpha zones.

    Entropy splits at 0.5 and 0.9; alpha splits at 42.5/47.5 deg (low
    entropy), 40/50 deg (medium) and 55 deg (high).  A pixel sitting on an
    alpha boundary goes to the lower zone.
    """
    h, a = eig.entropy, eig.alpha
    low = np.where(a <= 42.5, 0, np.where(a <= 47.5, 1, 2))
    mid = np.where(a <= 40.0, 3, np.where(a <= 50.0, 4, 5))
    high = np.where(a <= 55.0, 6, 7)
    zone = np.where(h < 0.5, low, np.where(h < 0.9, mid, high))
    label = np.where(eig.valid, zone, INVALID).astype(np.uint8)
    return LabelRaster(label, eig.valid.copy(), 8, ZONE_NAMES)


def init_alpha_quantiles(eig: EigenFeatures, k: int) -> LabelRaster:
    """Equal-population alpha bins; used when ``k`` differs from the zone count."""
    if k < 1:
        raise ValidationError(f"cluster count must be >= 1, got {k}")
    label = np.full(eig.valid.shape, INVALID, dtype=np.uint8)
    label[eig.valid] = quantile_tiers(eig.alpha[eig.valid], k)
    return LabelRaster(label, eig.valid.copy(), k)


def _regularized(v, eps):
    v = np.asarray(v, dtype=np.complex128)
    reg = v + eps * np.eye(3)
    sign, logdet = np.linalg.slogdet(reg)
    if not (np.isfinite(logdet) and abs(sign - 1.0) < 1e-9) or np.linalg.cond(reg) > 1e14:
        raise NumericError("cluster center is singular after regularization")
    return np.linalg.inv(reg), float(logdet)


def wishart_distance(t, v, eps=0.0):
    """``ln det(V') + tr(V'^-1 T)`` with ``V' = V + eps I``.

    ``t`` may be a single matrix or a stack ``(..., 3, 3)``.
    """
    inv, logdet = _regularized(v, eps)
    t = np.asarray(t, dtype=np.complex128)
    return logdet + np.einsum("ij,...ji->...", inv, t).real


def _distance_table(t, centers, eps):
    """Distances ``(n, k)`` of regularized samples to every center."""
    out = np.empty((t.shape[0], centers.shape[0]))
    for m, v in enumerate(centers):
        out[:, m] = wishart_distance(t, v, eps)
    return out


def _means(t, labels, k):
    counts = np.bincount(labels, minlength=k).astype(np.int64)
    flat = t.reshape(t.shape[0], 9)
    sums = np.empty((k, 9), dtype=np.complex128)
    for j in range(9):
        sums[:, j] = (np.bincount(labels, weights=flat[:, j].real, minlength=k)
                      + 1j * np.bincount(labels, weights=flat[:, j].imag, minlength=k))
    with np.errstate(invalid="ignore", divide="ignore"):
        centers = (sums / counts[:, None]).reshape(k, 3, 3)
    return centers, counts


def _compact(labels, counts):
    """Drop empty clusters; returns remapped labels and the kept ids."""
    keep = np.flatnonzero(counts > 0)
    remap = np.full(counts.size, -1, dtype=np.int64)
    remap[keep] = np.arange(keep.size)
    return remap[labels], keep


def wishart_iterate(coh: CoherencyField, init: LabelRaster, max_iter=50, rel_tol=1e-6,
                    eps=None):
    """Complex-Wishart k-means.

    Samples and centers are both shifted by ``eps * I`` (default
    ``1e-6 * mean trace``), so the member mean stays the exact minimizer of
    the within-cluster objective and the objective never increases.  Empty
    clusters are dropped.  Returns ``(model, labels)``; the returned labels
    are always the argmin assignment under the returned centers, and
    ``model.converged`` is set when that assignment is a fixed point.
    """
    valid = init.valid & (np.trace(coh.t, axis1=-2, axis2=-1).real > 0)
    if not valid.any():
        raise ValidationError("no valid pixels to cluster")
    t = coh.t[valid]
    if eps is None:
        eps = CENTER_EPS * float(np.mean(np.trace(t, axis1=1, axis2=2).real))
    t_reg = t + eps * np.eye(3)
    labels, kept = _compact(init.label[valid].astype(np.int64),
                            np.bincount(init.label[valid], minlength=init.n_classes))
    centers, counts = _means(t, labels, kept.size)

    def objective(lab, cen):
        table = _distance_table(t_reg, cen, eps)
        return table, float(np.sum(table[np.arange(lab.size), lab]))

    _, j_init = objective(labels, centers)
    history = [j_init]
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        table = _distance_table(t_reg, centers, eps)
        new = np.argmin(table, axis=1)
        j = float(np.sum(table[np.arange(new.size), new]))
        history.append(j)
        if np.array_equal(new, labels):
            converged = True
            break
        centers, counts = _means(t, new, centers.shape[0])
        labels, kept = _compact(new, counts)
        centers, counts = centers[kept], counts[kept]
        prev = history[-2]
        if abs(prev - j) < rel_tol * max(abs(prev), np.finfo(float).tiny):
            break
    if not converged:
        table = _distance_table(t_reg, centers, eps)
        labels = np.argmin(table, axis=1)
        counts = np.bincount(labels, minlength=centers.shape[0])
    log.info("wishart k-means: k=%d, %d iterations, objective %.6g, converged=%s",
             centers.shape[0], iterations, history[-1], converged)
    model = ClusterModel(centers=centers, counts=counts, objective=history[-1], eps=eps,
                         history=history, iterations=iterations, converged=converged)
    label = np.full(valid.shape, INVALID, dtype=np.uint8)
    label[valid] = labels
    return model, LabelRaster(label, valid, model.k)


def ambiguity_ratio(coh: CoherencyField, model: ClusterModel, labels: LabelRaster):
    """Best-to-second-best Wishart divergence per pixel.

    The divergence ``d(T, V) - ln det T - 3`` is non-negative and shares the
    argmin of the distance.  Values near 1 mark pixels nearly equidistant
    from two centers; single-cluster models and invalid pixels give 0.
    """
    out = np.zeros(labels.valid.shape)
    if model.k < 2 or not labels.valid.any():
        return out
    t = coh.t[labels.valid] + model.eps * np.eye(3)
    _, logdet_t = np.linalg.slogdet(t)
    div = _distance_table(t, model.centers, model.eps) - logdet_t[:, None] - 3.0
    div = np.maximum(div, 0.0)
    two = np.sort(div, axis=1)[:, :2]
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(two[:, 1] > 0, two[:, 0] / two[:, 1], 1.0)
    out[labels.valid] = ratio
    return out


def classify_primary(model: ClusterModel, eig: EigenFeatures, labels: LabelRaster):
    """Type each cluster by the mean alpha of its members."""
    lab = labels.label[labels.valid].astype(np.int64)
    counts = np.bincount(lab, minlength=model.k)
    if np.any(counts == 0):
        raise ValidationError(f"empty clusters: {np.flatnonzero(counts == 0).tolist()}")
    mean_alpha = np.bincount(lab, weights=eig.alpha[labels.valid], minlength=model.k) / counts
    types = ["odd" if a < ODD_MAX_ALPHA else "double" if a > DOUBLE_MIN_ALPHA else "volume"
             for a in mean_alpha]
    return replace(model, primary_type=types)


def primary_raster(model: ClusterModel, labels: LabelRaster) -> np.ndarray:
    """Per-pixel index into :data:`PRIMARY_TYPES`; invalid pixels get 255."""
    if model.primary_type is None:
        raise ValidationError("clusters have no primary type yet")
    lut = np.array([PRIMARY_TYPES.index(p) for p in model.primary_type], dtype=np.uint8)
    out = np.full(labels.label.shape, INVALID, dtype=np.uint8)
    out[labels.valid] = lut[labels.label[labels.valid]]
    return out


def quantile_tiers(values, n_sub: int) -> np.ndarray:
    """Equal-population tiers by rank; tied values share the lowest tier."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return np.zeros(0, dtype=np.int64)
    ordered = np.sort(values, kind="stable")
    first_rank = np.searchsorted(ordered, values, side="left")
    return (first_rank * n_sub) // values.size


def subclass_names(n_sub: int) -> tuple:
    return (tuple(f"odd tier {i + 1}" for i in range(n_sub))
            + tuple(f"volume tier {i + 1}" for i in range(n_sub))
            + ("double",))


def subclass_by_span(labels: LabelRaster, model: ClusterModel, span: SpanField, n_sub=5):
    """Split odd and volume pixels into ``n_sub`` SPAN tiers each.

    Output ids: odd tiers ``0..n_sub-1``, volume tiers ``n_sub..2n_sub-1``
    and a single double-bounce class ``2 n_sub``.
    """
    if n_sub < 1:
        raise ValidationError(f"n_sub must be >= 1, got {n_sub}")
    primary = primary_raster(model, labels)
    out = np.full(primary.shape, INVALID, dtype=np.uint8)
    for offset, kind in ((0, 0), (n_sub, 2)):
        mask = primary == kind
        out[mask] = offset + quantile_tiers(span.span[mask], n_sub)
    out[primary == 1] = 2 * n_sub
    return LabelRaster(out, labels.valid.copy(), 2 * n_sub + 1, subclass_names(n_sub))


def center_to_reals(center) -> list:
    """Row-major ``(re, im)`` pairs of the full 3x3 matrix: 18 numbers."""
    c = np.asarray(center, dtype=np.complex128).reshape(9)
    return [float(x) for pair in zip(c.real, c.imag) for x in pair]


def center_from_reals(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if v.size != 18:
        raise FormatError(f"cluster center needs 18 numbers, got {v.size}")
    return (v[0::2] + 1j * v[1::2]).reshape(3, 3)


def write_model(path, model: ClusterModel) -> None:
    write_json(path, {
        "version": 1,
        "k": model.k,
        "eps": model.eps,
        "objective": model.objective,
        "iterations": model.iterations,
        "converged": model.converged,
        "history": [float(h) for h in model.history],
        "counts": [int(c) for c in model.counts],
        "primary_type": model.primary_type,
        "centers": [center_to_reals(c) for c in model.centers],
    })


def read_model(path) -> ClusterModel:
    doc = read_json(path)
    try:
        centers = np.stack([center_from_reals(c) for c in doc["centers"]])
        return ClusterModel(centers=centers, counts=np.asarray(doc["counts"]),
                            objective=doc["objective"], eps=doc["eps"],
                            history=doc["history"], iterations=doc["iterations"],
                            converged=doc["converged"], primary_type=doc["primary_type"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed cluster model ({exc})") from exc


def write_labels(path, labels: LabelRaster) -> None:
    """8-bit index payload (``.u8``) plus a JSON manifest naming classes."""
    path = Path(path)
    payload = path.with_suffix(".u8")
    payload.write_bytes(np.ascontiguousarray(labels.label, dtype=np.uint8).tobytes())
    write_json(path, {"version": 1, "width": labels.width, "height": labels.height,
                      "n_classes": labels.n_classes, "invalid": INVALID,
                      "names": list(labels.names), "payload": payload.name})


def read_labels(path) -> LabelRaster:
    path = Path(path)
    doc = read_json(path)
    try:
        raw = (path.parent / doc["payload"]).read_bytes()
        w, h = doc["width"], doc["height"]
    except KeyError as exc:
        raise FormatError(f"{path}: incomplete label manifest ({exc})") from exc
    if len(raw) != w * h:
        raise FormatError(f"{path}: payload holds {len(raw)} bytes, expected {w * h}")
    label = np.frombuffer(raw, dtype=np.uint8).reshape(h, w).copy()
    return LabelRaster(label, label != INVALID, doc["n_classes"], tuple(doc["names"]))
