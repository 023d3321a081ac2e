"""Synthetic indoor-style scenes: a floor, four walls, and clutter objects.

Class 0 is the floor, class 1 the walls, classes 2..C-1 share the clutter
objects round-robin. Planar surfaces carry a tiled color texture so region
growing produces many mid-sized superpoints instead of one giant plane.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud
from .errors import ConfigError

# floor, walls, and the first clutter class share one base gray: appearance
# must not separate them, only geometry and labeled coverage can
PALETTE = [
    (0.50, 0.50, 0.50),  # floor
    (0.50, 0.50, 0.50),  # walls
    (0.50, 0.50, 0.50),
    (0.40, 0.50, 0.60),
    (0.60, 0.45, 0.40),
    (0.52, 0.58, 0.44),
    (0.58, 0.44, 0.56),
]
# per-surface texture tile edge lengths; the denser floor gets smaller tiles
# so floor and wall superpoints come out comparable in size
FLOOR_TILE = 0.75
WALL_TILE = 1.5
TILE_AMPLITUDE = 0.08


@dataclass
class SceneSpec:
    points: int
    extent: tuple[float, float, float] = (8.0, 8.0, 3.0)
    weights: tuple[float, ...] = (0.8, 0.1, 0.1)
    clutter: int = 10
    sigma: float = 0.01
    rng_seed: int = 0
    color_jitter: float = 0.02

    def validate(self):
        if self.points < 1:
            raise ConfigError(f"points must be >= 1, got {self.points}")
        if len(self.extent) != 3 or any(e <= 0 for e in self.extent):
            raise ConfigError(f"extent must be 3 positive lengths, got {self.extent}")
        if len(self.weights) < 2:
            raise ConfigError("at least 2 classes are required")
        if any(w < 0 for w in self.weights) or sum(self.weights) <= 0:
            raise ConfigError(f"weights must be nonnegative with positive sum, got {self.weights}")
        if self.sigma < 0:
            raise ConfigError(f"sigma must be >= 0, got {self.sigma}")
        if self.clutter < 0:
            raise ConfigError(f"clutter must be >= 0, got {self.clutter}")
        if len(self.weights) > 2 and sum(self.weights[2:]) > 0 and self.clutter < 1:
            raise ConfigError("clutter classes have weight but clutter count is 0")


def _tile_offsets(coords_2d: np.ndarray, class_id: int, seed: int, tile: float) -> np.ndarray:
    """Deterministic per-tile color offset for planar surfaces."""
    cells = np.floor(coords_2d / tile).astype(np.int64)
    uniq, inverse = np.unique(cells, axis=0, return_inverse=True)
    offsets = np.empty((len(uniq), 3))
    for i, (cx, cy) in enumerate(uniq):
        cell_rng = np.random.default_rng([seed, class_id, int(cx) + 4096, int(cy) + 4096])
        offsets[i] = cell_rng.uniform(-TILE_AMPLITUDE, TILE_AMPLITUDE, 3)
    return offsets[inverse]


def _sample_floor(n: int, extent, rng) -> np.ndarray:
    pts = np.zeros((n, 3))
    pts[:, 0] = rng.uniform(0.0, extent[0], n)
    pts[:, 1] = rng.uniform(0.0, extent[1], n)
    return pts


def _sample_walls(n: int, extent, rng) -> np.ndarray:
    lx, ly, lz = extent
    wall = rng.integers(0, 4, n)
    pts = np.zeros((n, 3))
    pts[:, 2] = rng.uniform(0.0, lz, n)
    along = rng.uniform(0.0, 1.0, n)
    pts[:, 0] = np.select([wall == 0, wall == 1], [0.0, lx], default=along * lx)
    pts[:, 1] = np.select([wall == 2, wall == 3], [0.0, ly], default=along * ly)
    return pts


def _sample_box_surface(n: int, center, half, rng) -> np.ndarray:
    areas = np.array([half[1] * half[2], half[0] * half[2], half[0] * half[1]])
    face_axis = rng.choice(3, size=n, p=areas / areas.sum())
    side = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    pts = rng.uniform(-1.0, 1.0, (n, 3)) * half
    pts[np.arange(n), face_axis] = side * half[face_axis]
    return center + pts


def _sample_sphere_surface(n: int, center, radius: float, rng) -> np.ndarray:
    v = rng.normal(size=(n, 3))
    v /= np.maximum(np.linalg.norm(v, axis=1, keepdims=True), 1e-12)
    return center + radius * v


def generate_scene(spec: SceneSpec) -> PointCloud:
    """Deterministic synthetic scene; identical seeds give identical clouds."""
    spec.validate()
    rng = np.random.default_rng(spec.rng_seed)
    weights = np.asarray(spec.weights, dtype=np.float64)
    weights = weights / weights.sum()
    num_classes = len(weights)
    counts = rng.multinomial(spec.points, weights)

    positions, colors, labels = [], [], []

    def add(pts, cls, tile_coords=None, tile=1.0, color_shift=0.0):
        base = np.array(PALETTE[cls % len(PALETTE)]) + color_shift
        cols = np.tile(base, (len(pts), 1))
        if tile_coords is not None:
            cols = cols + _tile_offsets(tile_coords, cls, spec.rng_seed, tile)
        positions.append(pts)
        colors.append(cols)
        labels.append(np.full(len(pts), cls, dtype=np.int64))

    if counts[0] > 0:
        pts = _sample_floor(int(counts[0]), spec.extent, rng)
        add(pts, 0, tile_coords=pts[:, :2], tile=FLOOR_TILE)
    if num_classes > 1 and counts[1] > 0:
        pts = _sample_walls(int(counts[1]), spec.extent, rng)
        # tile walls by (distance along the wall loop, height)
        loop = np.where(pts[:, 0] % spec.extent[0] < 1e-9, pts[:, 1], pts[:, 0])
        add(pts, 1, tile_coords=np.stack([loop, pts[:, 2]], axis=1), tile=WALL_TILE)

    clutter_classes = list(range(2, num_classes))
    if clutter_classes and counts[2:].sum() > 0:
        objects = []
        lx, ly, lz = spec.extent
        for obj in range(spec.clutter):
            size = rng.uniform(0.2, 0.6)
            center = np.array([
                rng.uniform(size, lx - size) if lx > 2 * size else lx / 2,
                rng.uniform(size, ly - size) if ly > 2 * size else ly / 2,
                rng.uniform(size, min(lz, 1.5)),
            ])
            objects.append((obj % 2, center, size, clutter_classes[obj % len(clutter_classes)]))
        for cls in clutter_classes:
            n_cls = int(counts[cls])
            if n_cls == 0:
                continue
            cls_objects = [o for o in objects if o[3] == cls] or objects
            per_obj = rng.multinomial(n_cls, np.full(len(cls_objects), 1.0 / len(cls_objects)))
            for (kind, center, size, _), n_obj in zip(cls_objects, per_obj):
                if n_obj == 0:
                    continue
                if kind == 0:
                    pts = _sample_box_surface(int(n_obj), center, np.full(3, size / 2), rng)
                else:
                    pts = _sample_sphere_surface(int(n_obj), center, size / 2, rng)
                add(pts, cls, color_shift=rng.uniform(-0.05, 0.05))

    pos = np.concatenate(positions)
    col = np.concatenate(colors)
    lab = np.concatenate(labels)
    if spec.sigma > 0:
        pos = pos + rng.normal(0.0, spec.sigma, pos.shape)
    if spec.color_jitter > 0:
        col = col + rng.uniform(-spec.color_jitter, spec.color_jitter, col.shape)
    col = np.clip(col, 0.0, 1.0)
    return PointCloud(pos, col, lab, num_classes)
