"""Segmentation quality metrics: accuracy, per-class IoU, mean IoU."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class EvalResult:
    accuracy: float
    per_class_iou: np.ndarray  # NaN for classes absent from both gt and prediction
    miou: float


def confusion_matrix(gt_labels, pred_labels, num_classes: int) -> np.ndarray:
    gt = np.asarray(gt_labels, dtype=np.int64)
    pred = np.asarray(pred_labels, dtype=np.int64)
    if gt.shape != pred.shape:
        raise DataError(f"length mismatch: {gt.shape} gt vs {pred.shape} predictions")
    if gt.size == 0:
        raise DataError("cannot evaluate empty label arrays")
    flat = gt * num_classes + pred
    return np.bincount(flat, minlength=num_classes * num_classes).reshape(
        num_classes, num_classes
    )


def evaluate(pred_labels, gt_labels, num_classes: int) -> EvalResult:
    """IoU_c = TP / (TP + FP + FN); classes absent from both sides are excluded."""
    cm = confusion_matrix(gt_labels, pred_labels, num_classes)
    tp = np.diag(cm).astype(np.float64)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    denom = tp + fp + fn
    iou = np.full(num_classes, np.nan)
    present = denom > 0
    iou[present] = tp[present] / denom[present]
    accuracy = float(tp.sum() / cm.sum())
    miou = float(np.nanmean(iou)) if present.any() else float("nan")
    return EvalResult(accuracy, iou, miou)
