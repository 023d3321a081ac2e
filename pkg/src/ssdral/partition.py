"""Superpoint generation by voxel-seeded region growing, plus region statistics.

The partitioner guarantees, by construction, that every point lands in exactly
one non-empty region: growth only claims unassigned points, and every point
that no seed reaches becomes a seed itself.
"""

from __future__ import annotations

from collections import deque

import numpy as np
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator, ClusterMixin

from .cloud import PointCloud, SuperpointPartition
from .errors import DataError
from .util import query_workers

NEIGHBORS = 10  # plane-fit neighborhood size for normal estimation
ADJACENCY_K = 16
DEGENERATE_EIGENVALUE = 1e-12


def purity(region, gt_labels) -> float:
    """Fraction of the region's points carrying its most frequent label."""
    region = np.asarray(region, dtype=np.int64)
    if region.size == 0:
        raise DataError("purity of an empty region is undefined")
    labels = np.asarray(gt_labels)[region]
    counts = np.bincount(labels)
    return float(counts.max()) / float(region.size)


def dominant_class(region, labels) -> int:
    """Most frequent label over the region; ties go to the lowest class id."""
    region = np.asarray(region, dtype=np.int64)
    if region.size == 0:
        raise DataError("dominant class of an empty region is undefined")
    counts = np.bincount(np.asarray(labels)[region])
    return int(counts.argmax())


def estimate_normals(positions: np.ndarray, k: int = NEIGHBORS) -> np.ndarray:
    """Per-point unit normals from a plane fit over the k nearest neighbors.

    Neighborhoods of rank < 2 (fewer than 3 points, or collinear) get the
    fixed up-axis normal (0, 0, 1). Normal signs are arbitrary.
    """
    n = len(positions)
    k_eff = min(k, n - 1)
    if k_eff < 2:
        return np.tile(np.array([0.0, 0.0, 1.0]), (n, 1))
    tree = cKDTree(positions)
    _, idx = tree.query(positions, k=k_eff + 1, workers=query_workers())
    neigh = positions[idx]  # (n, k+1, 3), col 0 is the point itself
    centered = neigh - neigh.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered)
    eigvals, eigvecs = np.linalg.eigh(cov)
    normals = eigvecs[:, :, 0].copy()
    degenerate = eigvals[:, 1] <= DEGENERATE_EIGENVALUE * np.maximum(eigvals[:, 2], 1.0)
    normals[degenerate] = (0.0, 0.0, 1.0)
    norms = np.linalg.norm(normals, axis=1, keepdims=True)
    return normals / np.maximum(norms, 1e-300)


class VoxelRegionGrowingPartitioner(BaseEstimator, ClusterMixin):
    """Greedy region growing from voxel-grid seeds.

    Points are adjacent when they are k-nearest neighbors within
    2 * voxel_size. A candidate joins a region when the angle between its
    normal and the region's running mean normal is at most normal_threshold
    and its color is within color_threshold of the region's running mean
    color. Regions smaller than min_region are merged into the adjacent
    region with the nearest centroid.

    Parameters
    ----------
    voxel_size : float
        Seeding grid edge length in meters; also bounds point adjacency.
    color_threshold : float
        Max Euclidean distance between a candidate color and the region mean.
    normal_threshold : float
        Max angle (radians) between a candidate normal and the region mean.
    min_region : int
        Regions smaller than this are merged into an adjacent region.
    rng_seed : int
        Seeds the processing order of the voxel seeds.
    """

    def __init__(
        self,
        voxel_size: float = 0.5,
        color_threshold: float = 0.1,
        normal_threshold: float = 0.5,
        min_region: int = 1,
        rng_seed: int = 0,
    ):
        self.voxel_size = voxel_size
        self.color_threshold = color_threshold
        self.normal_threshold = normal_threshold
        self.min_region = min_region
        self.rng_seed = rng_seed

    def _check_params(self):
        if self.voxel_size <= 0:
            raise DataError(f"voxel_size must be > 0, got {self.voxel_size}")
        if self.color_threshold < 0 or self.normal_threshold < 0:
            raise DataError("thresholds must be nonnegative")
        if self.min_region < 1:
            raise DataError(f"min_region must be >= 1, got {self.min_region}")

    def fit(self, cloud: PointCloud, y=None):
        self._check_params()
        positions = cloud.positions
        colors = cloud.colors

        normals = estimate_normals(positions)
        neighbors, edges = self._neighbor_lists(positions)
        seeds = self._voxel_seeds(positions)
        rng = np.random.default_rng(self.rng_seed)
        seeds = seeds[rng.permutation(len(seeds))]

        assignment = self._grow(positions, colors, normals, neighbors, seeds)
        assignment = self._merge_small(assignment, positions, edges)

        # relabel to consecutive ids ordered by first member index
        _, first = np.unique(assignment, return_index=True)
        remap = np.empty(assignment.max() + 1, dtype=np.int64)
        for rank, sid in enumerate(assignment[np.sort(first)]):
            remap[sid] = rank
        self.labels_ = remap[assignment]
        self.partition_ = SuperpointPartition.from_assignment(self.labels_)
        return self

    def fit_predict(self, cloud: PointCloud, y=None) -> np.ndarray:
        return self.fit(cloud).labels_

    def _neighbor_lists(self, positions):
        n = len(positions)
        k = min(ADJACENCY_K, n - 1)
        if k < 1:
            empty = np.empty((0, 2), dtype=np.int64)
            return [np.empty(0, dtype=np.int64)] * n, empty
        tree = cKDTree(positions)
        dists, idx = tree.query(positions, k=k + 1, workers=query_workers())
        keep = dists[:, 1:] <= 2.0 * self.voxel_size
        src = np.repeat(np.arange(n), keep.sum(axis=1))
        dst = idx[:, 1:][keep]
        edges = np.stack([src, dst], axis=1)
        # union-symmetrized adjacency: one-way k-NN links (common among
        # coincident or unevenly dense points) must not strand anyone
        all_src = np.concatenate([src, dst])
        all_dst = np.concatenate([dst, src])
        order = np.lexsort((all_dst, all_src))
        s_sorted, d_sorted = all_src[order], all_dst[order]
        keep_edge = np.ones(len(s_sorted), dtype=bool)
        keep_edge[1:] = (s_sorted[1:] != s_sorted[:-1]) | (d_sorted[1:] != d_sorted[:-1])
        s_sorted, d_sorted = s_sorted[keep_edge], d_sorted[keep_edge]
        lo = np.searchsorted(s_sorted, np.arange(n), side="left")
        hi = np.searchsorted(s_sorted, np.arange(n), side="right")
        neighbors = [d_sorted[a:b] for a, b in zip(lo, hi)]
        return neighbors, edges

    def _voxel_seeds(self, positions):
        lo = positions.min(axis=0)
        cells = np.floor((positions - lo) / self.voxel_size).astype(np.int64)
        dims = cells.max(axis=0) + 1
        keys = np.ravel_multi_index((cells[:, 0], cells[:, 1], cells[:, 2]), dims)
        _, inverse = np.unique(keys, return_inverse=True)
        centers = (cells + 0.5) * self.voxel_size + lo
        off = np.sqrt(((positions - centers) ** 2).sum(axis=1))
        # one seed per voxel: the point nearest the voxel center (lowest index on ties)
        order = np.lexsort((np.arange(len(positions)), off, inverse))
        sorted_inv = inverse[order]
        firsts = np.ones(len(order), dtype=bool)
        firsts[1:] = sorted_inv[1:] != sorted_inv[:-1]
        return order[firsts]

    def _grow(self, positions, colors, normals, neighbors, seeds):
        n = len(positions)
        assignment = np.full(n, -1, dtype=np.int64)
        cos_thresh = np.cos(min(self.normal_threshold, np.pi))
        region_id = 0

        def grow_from(seed):
            nonlocal region_id
            assignment[seed] = region_id
            color_sum = colors[seed].copy()
            normal_sum = normals[seed].copy()
            size = 1
            queue = deque([seed])
            while queue:
                i = queue.popleft()
                cand = neighbors[i]
                if cand.size == 0:
                    continue
                cand = cand[assignment[cand] == -1]
                if cand.size == 0:
                    continue
                mean_color = color_sum / size
                mean_normal = normal_sum / max(float(np.sqrt(normal_sum @ normal_sum)), 1e-300)
                diff = colors[cand] - mean_color
                ok_color = (diff * diff).sum(axis=1) <= self.color_threshold**2
                dots = normals[cand] @ mean_normal
                accepted = cand[ok_color & (np.abs(dots) >= cos_thresh)]
                if accepted.size == 0:
                    continue
                assignment[accepted] = region_id
                color_sum += colors[accepted].sum(axis=0)
                # flip normals into the region's hemisphere before averaging
                acc_norm = normals[accepted]
                signs = np.where(acc_norm @ mean_normal < 0, -1.0, 1.0)
                normal_sum += (acc_norm * signs[:, None]).sum(axis=0)
                size += accepted.size
                queue.extend(accepted.tolist())
            region_id += 1

        for seed in seeds:
            if assignment[seed] == -1:
                grow_from(int(seed))
        for i in range(n):
            if assignment[i] == -1:
                grow_from(i)
        return assignment

    def _merge_small(self, assignment, positions, edges):
        if self.min_region <= 1 or len(edges) == 0:
            return assignment
        assignment = assignment.copy()
        while True:
            ids, lab, counts = np.unique(assignment, return_inverse=True, return_counts=True)
            n_regions = len(ids)
            if n_regions == 1 or (counts >= self.min_region).all():
                return assignment
            sums = np.zeros((n_regions, 3))
            np.add.at(sums, lab, positions)
            centroids = sums / counts[:, None]
            ra, rb = lab[edges[:, 0]], lab[edges[:, 1]]
            cross = ra != rb
            ra, rb = ra[cross], rb[cross]
            # symmetrize and dedupe via scalar keys (cheaper than 2-d unique)
            src = np.concatenate([ra, rb])
            dst = np.concatenate([rb, ra])
            keys = np.unique(src.astype(np.int64) * n_regions + dst)
            adjacency: dict[int, list[int]] = {}
            for key in keys:
                adjacency.setdefault(int(key) // n_regions, []).append(int(key) % n_regions)
            target = np.arange(n_regions)
            for r in np.lexsort((np.arange(n_regions), counts)):
                r = int(r)
                if counts[r] >= self.min_region:
                    continue
                cand = adjacency.get(r)
                if not cand:
                    continue
                dist = np.linalg.norm(centroids[cand] - centroids[r], axis=1)
                target[r] = cand[int(np.argmin(dist))]
            if (target == np.arange(n_regions)).all():
                return assignment  # remaining small regions are isolated
            final = np.array([_resolve_chain(target, r) for r in range(n_regions)])
            assignment = ids[final][lab]


def _resolve_chain(target: np.ndarray, r: int) -> int:
    """Follow merge pointers to a fixed point; cycles collapse to their min id."""
    path = [r]
    cur = r
    while True:
        nxt = int(target[cur])
        if nxt == cur:
            return cur
        if nxt in path:
            return min(path[path.index(nxt):])
        path.append(nxt)
        cur = nxt


def generate_superpoints(
    cloud: PointCloud,
    voxel_size: float = 0.5,
    color_threshold: float = 0.1,
    normal_threshold: float = 0.5,
    min_region: int = 1,
    rng_seed: int = 0,
) -> SuperpointPartition:
    """Functional wrapper around VoxelRegionGrowingPartitioner."""
    est = VoxelRegionGrowingPartitioner(
        voxel_size=voxel_size,
        color_threshold=color_threshold,
        normal_threshold=normal_threshold,
        min_region=min_region,
        rng_seed=rng_seed,
    )
    est.fit(cloud)
    return est.partition_
