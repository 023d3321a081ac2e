"""Desk-scale segmentation learners behind a common fit/predict contract.

Both learners emit full Prediction objects: probability rows, argmax labels,
and per-point feature rows (probabilities, min-max normalized position,
color) that downstream graph reasoning consumes. A real network would plug
in at this same seam.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator

from .cloud import PointCloud, Prediction
from .errors import ConfigError, DataError
from .util import query_workers

LAPLACE = 1.0


def normalized_positions(positions: np.ndarray, lo=None, hi=None) -> np.ndarray:
    """Min-max normalize positions per cloud; constant axes map to 0."""
    positions = np.asarray(positions, dtype=np.float64)
    lo = positions.min(axis=0) if lo is None else lo
    hi = positions.max(axis=0) if hi is None else hi
    span = np.where(hi > lo, hi - lo, 1.0)
    return (positions - lo) / span


def point_features(cloud: PointCloud, probs: np.ndarray) -> np.ndarray:
    """Per-point feature rows: probabilities + normalized position + color."""
    return np.concatenate(
        [probs, normalized_positions(cloud.positions), cloud.colors], axis=1
    )


class KNNLearner(BaseEstimator):
    """Laplace-smoothed k-nearest-neighbor classifier in position+color space.

    p(c) = (count of c among the k nearest labeled points + 1) / (k + C).
    Positions are min-max normalized with the training cloud's bounds so the
    metric is scale-free; when fewer than k points are labeled, all of them
    are used.
    """

    def __init__(self, k: int = 5, rng_seed: int = 0):
        self.k = k
        self.rng_seed = rng_seed

    def fit(self, cloud: PointCloud, y):
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        y = np.asarray(y, dtype=np.int64)
        if y.shape != (len(cloud),):
            raise DataError("labels must align with the cloud")
        labeled = y >= 0
        if not labeled.any():
            raise DataError("knn learner needs at least one labeled point")
        self._num_classes = cloud.num_classes
        self._lo = cloud.positions.min(axis=0)
        self._hi = cloud.positions.max(axis=0)
        refs = np.concatenate(
            [normalized_positions(cloud.positions[labeled], self._lo, self._hi),
             cloud.colors[labeled]], axis=1
        )
        self._labels = y[labeled]
        self._tree = cKDTree(refs)
        return self

    def predict_proba(self, cloud: PointCloud) -> np.ndarray:
        queries = np.concatenate(
            [normalized_positions(cloud.positions, self._lo, self._hi), cloud.colors],
            axis=1,
        )
        k_eff = min(self.k, len(self._labels))
        _, idx = self._tree.query(queries, k=k_eff, workers=query_workers())
        if k_eff == 1:
            idx = idx[:, None]
        neighbor_labels = self._labels[idx]
        counts = np.zeros((len(cloud), self._num_classes))
        for col in range(k_eff):
            np.add.at(counts, (np.arange(len(cloud)), neighbor_labels[:, col]), 1.0)
        return (counts + LAPLACE) / (k_eff + self._num_classes * LAPLACE)

    def predict(self, cloud: PointCloud) -> np.ndarray:
        return self.predict_proba(cloud).argmax(axis=1)

    def predict_full(self, cloud: PointCloud) -> Prediction:
        probs = self.predict_proba(cloud)
        return Prediction.from_probs(probs, point_features(cloud, probs))


class NoisyOracleLearner(BaseEstimator):
    """Ground-truth oracle corrupted at a fixed rate; ignores the labeled set.

    With probability `accuracy` a point's true class receives probability
    `top_confidence`; otherwise a seeded wrong class does. The remaining mass
    is split evenly over the other classes. top_confidence must exceed 1/C so
    the argmax is always the chosen class.
    """

    def __init__(self, accuracy: float = 0.9, top_confidence: float = 0.9, rng_seed: int = 0):
        self.accuracy = accuracy
        self.top_confidence = top_confidence
        self.rng_seed = rng_seed

    def fit(self, cloud: PointCloud, y=None):
        if not 0.0 <= self.accuracy <= 1.0:
            raise ConfigError(f"accuracy must be in [0, 1], got {self.accuracy}")
        if not 1.0 / cloud.num_classes < self.top_confidence <= 1.0:
            raise ConfigError(
                f"top_confidence must be in (1/{cloud.num_classes}, 1], got {self.top_confidence}"
            )
        if cloud.num_classes < 2:
            raise DataError("noisy oracle needs at least 2 classes")
        self._num_classes = cloud.num_classes
        return self

    def _top_classes(self, cloud: PointCloud) -> np.ndarray:
        rng = np.random.default_rng(self.rng_seed)
        n = len(cloud)
        gt = cloud.gt_labels
        correct = rng.random(n) < self.accuracy
        wrong = rng.integers(0, self._num_classes - 1, size=n)
        wrong = wrong + (wrong >= gt)  # skip the true class
        return np.where(correct, gt, wrong)

    def predict_proba(self, cloud: PointCloud) -> np.ndarray:
        c = self._num_classes
        top = self._top_classes(cloud)
        rest = (1.0 - self.top_confidence) / (c - 1)
        probs = np.full((len(cloud), c), rest)
        probs[np.arange(len(cloud)), top] = self.top_confidence
        return probs

    def predict(self, cloud: PointCloud) -> np.ndarray:
        return self.predict_proba(cloud).argmax(axis=1)

    def predict_full(self, cloud: PointCloud) -> Prediction:
        probs = self.predict_proba(cloud)
        return Prediction.from_probs(probs, point_features(cloud, probs))


LEARNER_KINDS = ("knn", "noisy_oracle")


def make_learner(kind: str, *, k: int = 5, rho: float = 0.9, c_hi: float = 0.9, seed: int = 0):
    """Build a learner from the config-level vocabulary."""
    if kind == "knn":
        return KNNLearner(k=k, rng_seed=seed)
    if kind == "noisy_oracle":
        return NoisyOracleLearner(accuracy=rho, top_confidence=c_hi, rng_seed=seed)
    raise ConfigError(f"unknown learner kind {kind!r}; expected one of {LEARNER_KINDS}")
