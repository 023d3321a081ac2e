"""Superpoint graph construction, feature aggregation, and diversity selection.

Edges combine the centroid (location) distance with the chamfer distance and
are weighted by exp(-(D_l + D_c)), so far or structurally dissimilar
superpoints contribute almost nothing when features are merged. Farthest
point sampling over the merged features then picks a spatially and
structurally diverse batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .cloud import Prediction
from .errors import DataError
from .util import query_workers

BRUTE_FORCE_PAIR_LIMIT = 10**6


@dataclass(frozen=True)
class SuperpointFeature:
    """Graph node payload: feature row, centroid, and member point positions."""

    superpoint_id: int
    f: np.ndarray
    centroid: np.ndarray
    points: np.ndarray


def superpoint_feature(region, prediction: Prediction, positions, superpoint_id: int) -> SuperpointFeature:
    """Node features: mean feature over the majority-predicted points.

    The centroid is the mean position of the whole region; the feature row
    averages only the points whose predicted class is the region's dominant
    predicted class.
    """
    region = np.asarray(region, dtype=np.int64)
    if region.size == 0:
        raise DataError("cannot build features for an empty region")
    preds = prediction.pred_labels[region]
    c = int(np.bincount(preds).argmax())
    majority = region[preds == c]
    f = prediction.features[majority].mean(axis=0)
    pts = np.asarray(positions)[region]
    return SuperpointFeature(int(superpoint_id), f, pts.mean(axis=0), pts)


def location_distance(a: SuperpointFeature, b: SuperpointFeature) -> float:
    return float(np.linalg.norm(a.centroid - b.centroid))


def _min_sq_dists_brute(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1)
    return d2.min(axis=1)


def _min_sq_dists_tree(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # squared distances recomputed from coordinates so the result is
    # bit-identical to the brute-force path
    tree = cKDTree(b)
    _, idx = tree.query(a, k=1, workers=query_workers())
    return ((a - b[idx]) ** 2).sum(axis=1)


def chamfer_distance(a, b, method: str = "auto") -> float:
    """Symmetric mean of squared nearest-neighbor distances between point sets."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise DataError("chamfer distance needs two (n, d) arrays of equal dimension")
    if len(a) == 0 or len(b) == 0:
        raise DataError("chamfer distance of an empty set is undefined")
    if method == "auto":
        method = "tree" if len(a) * len(b) > BRUTE_FORCE_PAIR_LIMIT else "brute"
    if method == "brute":
        fwd, bwd = _min_sq_dists_brute(a, b), _min_sq_dists_brute(b, a)
    elif method == "tree":
        fwd, bwd = _min_sq_dists_tree(a, b), _min_sq_dists_tree(b, a)
    else:
        raise DataError(f"unknown chamfer method {method!r}")
    return float(fwd.mean() + bwd.mean())


MIN_WEIGHT = float(np.finfo(np.float64).tiny)  # exp underflow would alias "no edge"


def edge_weight(location_dist: float, chamfer_dist: float) -> float:
    """exp(-(D_l + D_c)); strictly positive, 1 at zero distance."""
    if not (np.isfinite(location_dist) and np.isfinite(chamfer_dist)):
        raise DataError("edge weight inputs must be finite")
    if location_dist < 0 or chamfer_dist < 0:
        raise DataError("edge weight inputs must be nonnegative")
    return max(float(np.exp(-(location_dist + chamfer_dist))), MIN_WEIGHT)


@dataclass(frozen=True)
class SuperpointGraph:
    """Undirected weighted graph over candidate superpoints.

    weights is dense (n, n): zero means "no edge", the diagonal is zero, and
    every node's neighborhood implicitly contains the node itself with
    weight 1.
    """

    node_ids: tuple[int, ...]
    features: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.node_ids)

    def edges(self):
        """Yield (i, j, weight) with i < j over graph-local indices."""
        n = len(self.node_ids)
        for i in range(n):
            for j in range(i + 1, n):
                if self.weights[i, j] > 0.0:
                    yield i, j, float(self.weights[i, j])

    def neighbors(self, i: int) -> list[int]:
        """Graph-local neighbor indices of node i, including i itself."""
        out = [j for j in range(len(self.node_ids)) if self.weights[i, j] > 0.0 or j == i]
        return out


def _pairwise_combined_distances(candidates) -> np.ndarray:
    """Symmetric matrix of D_l + D_c over all candidate pairs.

    KD-trees are built once per candidate; squared distances are recomputed
    from coordinates, so entries equal the brute-force chamfer bit for bit.
    """
    n = len(candidates)
    combined = np.zeros((n, n))
    trees = [
        cKDTree(c.points) if len(c.points) > 64 else None for c in candidates
    ]

    def min_sq(a: np.ndarray, b: np.ndarray, tree_b) -> np.ndarray:
        if tree_b is None or len(a) * len(b) <= 4096:
            return _min_sq_dists_brute(a, b)
        _, idx = tree_b.query(a, k=1)
        return ((a - b[idx]) ** 2).sum(axis=1)

    for i in range(n):
        for j in range(i + 1, n):
            a, b = candidates[i].points, candidates[j].points
            fwd = min_sq(a, b, trees[j])
            bwd = min_sq(b, a, trees[i])
            d = location_distance(candidates[i], candidates[j]) + float(
                fwd.mean() + bwd.mean()
            )
            combined[i, j] = combined[j, i] = d
    return combined


def build_graph(candidates, k: int = 5) -> SuperpointGraph:
    """Symmetrized k-NN graph under combined location + chamfer distance.

    Each node connects to its k nearest candidates (ties toward the lower
    index); the union of directed edges is kept, weighted by
    exp(-(D_l + D_c)). k is clamped to pool size - 1.
    """
    candidates = list(candidates)
    if not candidates:
        raise DataError("cannot build a graph from zero candidates")
    if k < 0:
        raise DataError(f"k must be >= 0, got {k}")
    n = len(candidates)
    combined = _pairwise_combined_distances(candidates)
    k_eff = min(k, n - 1)
    weights = np.zeros((n, n))
    for i in range(n):
        others = np.array([j for j in range(n) if j != i], dtype=np.int64)
        if k_eff == 0 or others.size == 0:
            continue
        order = np.lexsort((others, combined[i, others]))
        for j in others[order[:k_eff]]:
            w = max(float(np.exp(-combined[i, j])), MIN_WEIGHT)
            weights[i, j] = weights[j, i] = w
    features = np.stack([c.f for c in candidates])
    return SuperpointGraph(tuple(c.superpoint_id for c in candidates), features, weights)


def aggregate(graph: SuperpointGraph, rounds: int = 1, agg_nodes="all", normalize: bool = False) -> np.ndarray:
    """Weighted-sum feature merge over one-hop neighborhoods.

    f*_i = sum_{j in N_i} w(i, j) f_j with self weight 1. Nodes outside
    agg_nodes keep their features unchanged; with rounds > 1 each round
    feeds the next. agg_nodes is "all" or the first N nodes (candidates are
    ordered by acquisition rank). With normalize=True the sum is divided by
    the total weight of the neighborhood.
    """
    if rounds < 1:
        raise DataError(f"rounds must be >= 1, got {rounds}")
    n = len(graph)
    if agg_nodes == "all":
        active = np.arange(n)
    else:
        count = int(agg_nodes)
        if count < 0:
            raise DataError(f"agg_nodes must be 'all' or >= 0, got {agg_nodes}")
        active = np.arange(min(count, n))
    feats = graph.features.copy()
    w_self = graph.weights + np.eye(n)
    for _ in range(rounds):
        merged = w_self @ feats
        if normalize:
            merged = merged / w_self.sum(axis=1, keepdims=True)
        nxt = feats.copy()
        nxt[active] = merged[active]
        feats = nxt
    return feats


def fps_select(features, count: int, start: int = 0) -> list[int]:
    """Greedy max-min (farthest point) selection over feature rows.

    Repeatedly adds the row maximizing the minimum Euclidean distance to
    the selected set; ties go to the lowest index.
    """
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2:
        raise DataError("fps needs an (n, d) feature matrix")
    n = len(f)
    if not 1 <= count <= n:
        raise DataError(f"selection count must be in [1, {n}], got {count}")
    if not 0 <= start < n:
        raise DataError(f"start index {start} out of range")
    selected = [start]
    used = np.zeros(n, dtype=bool)
    used[start] = True
    # squared distances preserve the argmax and the tie pattern
    min_d2 = ((f - f[start]) ** 2).sum(axis=1)
    while len(selected) < count:
        gain = np.where(used, -1.0, min_d2)  # duplicates of selected rows last
        nxt = int(np.argmax(gain))
        selected.append(nxt)
        used[nxt] = True
        min_d2 = np.minimum(min_d2, ((f - f[nxt]) ** 2).sum(axis=1))
    return selected
