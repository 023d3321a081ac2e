"""Point and superpoint uncertainty scores and class-balanced candidate ranking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cloud import check_prob_rows
from .errors import DataError


def _rows(probs) -> tuple[np.ndarray, bool]:
    p = np.asarray(probs, dtype=np.float64)
    single = p.ndim == 1
    p = check_prob_rows(p.reshape(1, -1) if single else p)
    return p, single


def bvsb_uncertainty(probs):
    """Second-best over best probability; 1.0 when the best is 0."""
    p, single = _rows(probs)
    if p.shape[1] < 2:
        raise DataError("best-versus-second-best needs at least 2 classes")
    top2 = -np.partition(-p, 1, axis=1)[:, :2]
    u = np.where(top2[:, 0] > 0.0, top2[:, 1] / np.where(top2[:, 0] > 0.0, top2[:, 0], 1.0), 1.0)
    return float(u[0]) if single else u


def entropy_uncertainty(probs):
    """Shannon entropy in nats, with 0 * ln 0 = 0."""
    p, single = _rows(probs)
    terms = np.where(p > 0.0, -p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    u = terms.sum(axis=1)
    return float(u[0]) if single else u


def least_confidence(probs):
    """One minus the top probability."""
    p, single = _rows(probs)
    u = 1.0 - p.max(axis=1)
    return float(u[0]) if single else u


POINT_SCORERS = {
    "bvsb": bvsb_uncertainty,
    "entropy": entropy_uncertainty,
    "lc": least_confidence,
}


def region_mean_uncertainty(point_scores, region) -> float:
    """Mean point uncertainty over a region."""
    region = np.asarray(region, dtype=np.int64)
    if region.size == 0:
        raise DataError("mean uncertainty of an empty region is undefined")
    return float(np.asarray(point_scores)[region].mean())


def region_margin_uncertainty(point_scores, pred_labels, region) -> float:
    """Dominant-class uncertainty sum minus the rest; may be negative.

    The dominant class is the most frequent predicted class over the region
    (ties toward the lowest class id).
    """
    region = np.asarray(region, dtype=np.int64)
    if region.size == 0:
        raise DataError("margin uncertainty of an empty region is undefined")
    u = np.asarray(point_scores)[region]
    preds = np.asarray(pred_labels)[region]
    c = int(np.bincount(preds).argmax())
    dominant = preds == c
    return float(u[dominant].sum() - u[~dominant].sum())


def class_weights(dominant_classes, num_classes: int) -> np.ndarray:
    """exp(-share) per class, over the dominant classes of the pooled superpoints."""
    dom = np.asarray(dominant_classes, dtype=np.int64)
    if dom.size == 0:
        raise DataError("class weights need at least one superpoint")
    counts = np.bincount(dom, minlength=num_classes)
    if len(counts) > num_classes:
        raise DataError("dominant class id outside [0, num_classes)")
    return np.exp(-counts / dom.size)


@dataclass(frozen=True)
class SuperpointScore:
    superpoint_id: int
    uncertainty: float
    dominant_pred: int
    score: float


def classbal_rank(superpoint_ids, uncertainties, dominant_preds, weights, limit: int):
    """Rank candidates by uncertainty * class weight, descending.

    Stable sort; ties go to the lower superpoint id. Returns at most
    min(limit, pool size) entries.
    """
    ids = np.asarray(superpoint_ids, dtype=np.int64)
    if ids.size == 0:
        raise DataError("cannot rank an empty candidate pool")
    if limit < 1:
        raise DataError(f"pool size must be >= 1, got {limit}")
    u = np.asarray(uncertainties, dtype=np.float64)
    dom = np.asarray(dominant_preds, dtype=np.int64)
    w = np.asarray(weights, dtype=np.float64)
    scores = u * w[dom]
    order = np.lexsort((ids, -scores))[: min(limit, ids.size)]
    return [
        SuperpointScore(int(ids[i]), float(u[i]), int(dom[i]), float(scores[i]))
        for i in order
    ]


def random_select(superpoint_ids, count: int, rng) -> list[int]:
    """Uniform sample without replacement; rng is a seed or a numpy Generator."""
    ids = np.asarray(superpoint_ids, dtype=np.int64)
    if count > ids.size:
        raise DataError(f"cannot select {count} from a pool of {ids.size}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return [int(i) for i in rng.choice(ids, size=count, replace=False)]
