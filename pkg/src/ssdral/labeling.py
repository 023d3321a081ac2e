"""Click-budgeted annotation: dominant labeling and noise-aware iterative labeling.

One click assigns one class to one region; splitting a superpoint into
prediction-pure sub-regions also costs one click. The per-cycle budget is
checked before each candidate, so the final candidate may overshoot it;
the ledger reports actual clicks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .cloud import SuperpointPartition
from .errors import DataError
from .partition import dominant_class


def purity_at_least(region, gt_labels, theta: float) -> bool:
    """Exact rational test count/size >= theta.

    Float division can round a purity like 9/10 up to equality with
    theta = 0.9, which would break the no-tolerance mislabel bound
    (mislabel fraction <= 1 - theta) by half an ulp.
    """
    region = np.asarray(region, dtype=np.int64)
    if region.size == 0:
        raise DataError("purity of an empty region is undefined")
    counts = np.bincount(np.asarray(gt_labels)[region])
    return Fraction(int(counts.max()), int(region.size)) >= Fraction(theta)


class ClickLedger:
    """Click counter against a per-cycle budget; counts only ever increase."""

    def __init__(self, budget: int):
        if budget < 1:
            raise DataError(f"click budget must be >= 1, got {budget}")
        self.budget = int(budget)
        self.clicks_used = 0

    def charge(self, clicks: int = 1):
        if clicks < 0:
            raise DataError("cannot refund clicks")
        self.clicks_used += clicks

    @property
    def within_budget(self) -> bool:
        return self.clicks_used < self.budget


@dataclass(frozen=True)
class LabeledRegion:
    indices: np.ndarray
    label: int
    source_superpoint: int


@dataclass(frozen=True)
class SubRegion:
    """A prediction-pure slice of one superpoint."""

    parent: int
    indices: np.ndarray
    pred_class: int


@dataclass
class AnnotationState:
    """Labeled / unlabeled / discarded bookkeeping over one partition.

    Labeled regions, discarded regions, and the member points of unlabeled
    superpoints stay pairwise disjoint; discarded points never come back.
    """

    partition: SuperpointPartition
    unlabeled: set[int] = field(init=False)
    labeled_regions: list[LabeledRegion] = field(default_factory=list)
    discarded: list[np.ndarray] = field(default_factory=list)

    STATUS_UNLABELED = 0
    STATUS_LABELED = 1
    STATUS_DISCARDED = 2

    def __post_init__(self):
        self.unlabeled = set(range(len(self.partition)))
        n = self.partition.num_points
        self.point_labels = np.full(n, -1, dtype=np.int64)
        self.point_status = np.zeros(n, dtype=np.uint8)
        self._labeled_superpoints: set[int] = set()

    def unlabeled_ids(self) -> list[int]:
        return sorted(self.unlabeled)

    def label_region(self, indices, label: int, source_superpoint: int):
        indices = np.asarray(indices, dtype=np.int64)
        if indices.size == 0:
            raise DataError("cannot label an empty region")
        if (self.point_status[indices] != self.STATUS_UNLABELED).any():
            raise DataError("region overlaps already labeled or discarded points")
        self.point_labels[indices] = label
        self.point_status[indices] = self.STATUS_LABELED
        self.labeled_regions.append(LabeledRegion(indices, int(label), int(source_superpoint)))
        self._labeled_superpoints.add(int(source_superpoint))

    def discard_region(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        if (self.point_status[indices] != self.STATUS_UNLABELED).any():
            raise DataError("region overlaps already labeled or discarded points")
        self.point_status[indices] = self.STATUS_DISCARDED
        self.discarded.append(indices)

    def remove_from_unlabeled(self, superpoint_id: int):
        self.unlabeled.discard(int(superpoint_id))

    @property
    def labeled_superpoint_count(self) -> int:
        return len(self._labeled_superpoints)

    @property
    def labeled_point_count(self) -> int:
        return int((self.point_status == self.STATUS_LABELED).sum())

    def annotated_superpoint_classes(self) -> dict[int, int]:
        """Per labeled superpoint, the class of its largest labeled region."""
        best: dict[int, tuple[int, int]] = {}
        for region in self.labeled_regions:
            key = region.source_superpoint
            entry = (-len(region.indices), region.label)
            if key not in best or entry < best[key]:
                best[key] = entry
        return {sid: entry[1] for sid, entry in best.items()}

    def mislabeled_count(self, gt_labels) -> int:
        labeled = self.point_status == self.STATUS_LABELED
        return int((self.point_labels[labeled] != np.asarray(gt_labels)[labeled]).sum())


def dominant_labeling(superpoint_id: int, partition: SuperpointPartition, gt_labels,
                      state: AnnotationState, ledger: ClickLedger) -> LabeledRegion:
    """Label a whole superpoint with its ground-truth dominant class for one click.

    Minority points receive that class too; that noise is visible through
    AnnotationState.mislabeled_count.
    """
    if not ledger.within_budget:
        raise DataError("click budget exhausted")
    region = partition.superpoints[superpoint_id]
    cls = dominant_class(region, gt_labels)
    ledger.charge()
    state.label_region(region, cls, superpoint_id)
    state.remove_from_unlabeled(superpoint_id)
    return state.labeled_regions[-1]


def split_subregions(superpoint_id: int, region, pred_labels) -> list[SubRegion]:
    """One sub-region per distinct predicted class, in ascending class order."""
    region = np.asarray(region, dtype=np.int64)
    if region.size == 0:
        raise DataError("cannot split an empty superpoint")
    preds = np.asarray(pred_labels)[region]
    return [
        SubRegion(int(superpoint_id), region[preds == c], int(c))
        for c in np.unique(preds)
    ]


def noise_aware_labeling(candidates, theta: float, gt_labels, pred_labels,
                         partition: SuperpointPartition, state: AnnotationState,
                         ledger: ClickLedger):
    """Iterative labeling of a candidate sequence under a click budget.

    For each candidate while the budget is not exhausted: a superpoint with
    ground-truth purity >= theta is labeled whole (one click); otherwise it
    is split by predicted class (one click) and each sub-region with purity
    >= theta is labeled (one click each) while the rest are discarded for
    good. Every processed candidate leaves the unlabeled set; candidates
    the budget never reached stay in it.
    """
    if not 0.0 < theta <= 1.0:
        raise DataError(f"theta must be in (0, 1], got {theta}")
    for sid in candidates:
        if not ledger.within_budget:
            break
        region = partition.superpoints[sid]
        if purity_at_least(region, gt_labels, theta):
            ledger.charge()
            state.label_region(region, dominant_class(region, gt_labels), sid)
        else:
            ledger.charge()  # the split itself
            for sub in split_subregions(sid, region, pred_labels):
                if purity_at_least(sub.indices, gt_labels, theta):
                    ledger.charge()
                    state.label_region(sub.indices, dominant_class(sub.indices, gt_labels), sid)
                else:
                    state.discard_region(sub.indices)
        state.remove_from_unlabeled(sid)
