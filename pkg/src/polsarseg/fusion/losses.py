"""Cross-entropy and class-weighted focal loss over probability rows.

The class axis is last; every leading position is one sample and the loss
is the mean over samples.
"""
from __future__ import annotations

import numpy as np

from ..errors import ValidationError
from .autograd import Tensor, as_tensor, log

ROW_TOL = 1e-6


def _check(pred: Tensor, labels) -> np.ndarray:
    y = np.asarray(labels.data if isinstance(labels, Tensor) else labels, dtype=np.float64)
    if y.shape != pred.shape:
        raise ValidationError(f"labels {y.shape} and predictions {pred.shape} differ in shape")
    p = pred.data
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise ValidationError("predicted probabilities must lie in [0, 1]")
    if np.any((p == 0.0) & (y != 0.0)):
        raise ValidationError("zero probability on a labelled class")
    if np.any(np.abs(p.sum(axis=-1) - 1.0) > ROW_TOL):
        raise ValidationError("prediction rows must sum to 1")
    return y


def _log_where_labelled(pred: Tensor, y: np.ndarray) -> Tensor:
    # unlabelled entries read log(1) = 0, so zero probabilities there are harmless
    mask = (y != 0.0).astype(np.float64)
    return log(pred * mask + (1.0 - mask))


def _sample_count(shape) -> int:
    return int(np.prod(shape[:-1])) if len(shape) > 1 else 1


def ce_loss(pred, labels) -> Tensor:
    """``mean_samples( -sum_c y_c log p_c )``."""
    pred = as_tensor(pred)
    y = _check(pred, labels)
    per = (_log_where_labelled(pred, y) * y).sum(axis=-1)
    return -per.sum() * (1.0 / _sample_count(pred.shape))


def class_weights(proportions) -> np.ndarray:
    p = np.asarray(proportions, dtype=np.float64)
    if np.any(p <= 0.0):
        raise ValidationError("class proportions must be positive")
    if abs(p.sum() - 1.0) > ROW_TOL:
        raise ValidationError(f"class proportions sum to {p.sum()}, not 1")
    return 1.0 / p


def focal_loss(pred, labels, proportions, gamma=2.0) -> Tensor:
    """``mean_samples( -sum_c w_c (1 - p_c)^gamma y_c log p_c )`` with
    ``w_c = 1 / proportion_c``."""
    if gamma < 0:
        raise ValidationError(f"gamma must be >= 0, got {gamma}")
    pred = as_tensor(pred)
    y = _check(pred, labels)
    w = class_weights(proportions)
    if w.size != pred.shape[-1]:
        raise ValidationError(f"{w.size} proportions for {pred.shape[-1]} classes")
    term = _log_where_labelled(pred, y) * (y * w)
    if gamma != 0:
        term = term * (1.0 - pred) ** gamma
    per = term.sum(axis=-1)
    return -per.sum() * (1.0 / _sample_count(pred.shape))
