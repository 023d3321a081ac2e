"""Scene and partition data types plus the text file format.

The on-disk format is one point per line, whitespace separated:

    x y z r g b label [superpoint_id]

Lines starting with `#` are comments. Coordinates are meters, colors are
floats in [0, 1] (a file with any channel > 1 is assumed to be 0-255 and is
rescaled on load), labels and superpoint ids are zero-based integers.
Floats are written with 9 significant digits, which round-trips exactly
through float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import DataError

FLOAT_FORMAT = "%.9g"
PROB_TOL = 1e-6


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def as_positions(x, name: str = "positions") -> np.ndarray:
    """Validate an (N, 3) float array of finite coordinates."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != 3:
        raise DataError(f"{name} must have shape (N, 3), got {a.shape}")
    if not np.isfinite(a).all():
        raise DataError(f"{name} contains non-finite values")
    return _readonly(a)


def as_colors(x, name: str = "colors") -> np.ndarray:
    """Validate an (N, 3) float array with entries in [0, 1]."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != 3:
        raise DataError(f"{name} must have shape (N, 3), got {a.shape}")
    if not np.isfinite(a).all():
        raise DataError(f"{name} contains non-finite values")
    if a.size and (a.min() < 0.0 or a.max() > 1.0):
        raise DataError(f"{name} must lie in [0, 1]")
    return _readonly(a)


def as_labels(x, num_classes: int, name: str = "labels") -> np.ndarray:
    """Validate an (N,) integer array of class ids in [0, num_classes)."""
    a = np.asarray(x)
    if a.ndim != 1:
        raise DataError(f"{name} must be one-dimensional, got shape {a.shape}")
    if a.size and not np.issubdtype(a.dtype, np.integer):
        if not np.all(a == np.floor(a)):
            raise DataError(f"{name} must be integers")
    a = a.astype(np.int64)
    if a.size and (a.min() < 0 or a.max() >= num_classes):
        bad = int(a.min() if a.min() < 0 else a.max())
        raise DataError(f"{name} must lie in [0, {num_classes}), got {bad}")
    return _readonly(a)


def check_prob_rows(probs, num_classes: int | None = None, tol: float = PROB_TOL) -> np.ndarray:
    """Validate probability rows: nonnegative, each summing to 1 within tol."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 2:
        raise DataError(f"probability rows must be 2-d, got shape {p.shape}")
    if num_classes is not None and p.shape[1] != num_classes:
        raise DataError(f"expected {num_classes} classes, got {p.shape[1]}")
    if not np.isfinite(p).all():
        raise DataError("probability rows contain non-finite values")
    if p.size and p.min() < -tol:
        raise DataError("probability rows contain negative entries")
    sums = p.sum(axis=1)
    if p.size and np.abs(sums - 1.0).max() > tol:
        bad = int(np.abs(sums - 1.0).argmax())
        raise DataError(f"probability row {bad} sums to {sums[bad]:.8f}, not 1")
    return p


@dataclass(frozen=True)
class PointCloud:
    """A scene: positions (m), colors in [0,1], and ground-truth class labels."""

    positions: np.ndarray
    colors: np.ndarray
    gt_labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        if self.num_classes < 1:
            raise DataError(f"num_classes must be >= 1, got {self.num_classes}")
        object.__setattr__(self, "positions", as_positions(self.positions))
        object.__setattr__(self, "colors", as_colors(self.colors))
        object.__setattr__(
            self, "gt_labels", as_labels(self.gt_labels, self.num_classes, "gt_labels")
        )
        n = len(self.positions)
        if n == 0:
            raise DataError("point cloud is empty")
        if len(self.colors) != n or len(self.gt_labels) != n:
            raise DataError(
                f"field lengths disagree: {n} positions, "
                f"{len(self.colors)} colors, {len(self.gt_labels)} labels"
            )

    def __len__(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class SuperpointPartition:
    """Assignment of points to superpoints; member lists are the source of truth.

    The constructor does not enforce the partition invariants (total coverage,
    disjointness, non-emptiness) so that broken partitions can be represented
    and reported by validate_partition. Code downstream of validation assumes
    a valid partition.
    """

    superpoints: tuple[np.ndarray, ...]
    num_points: int

    def __post_init__(self):
        members = tuple(_readonly(np.asarray(m, dtype=np.int64).ravel()) for m in self.superpoints)
        object.__setattr__(self, "superpoints", members)

    @classmethod
    def from_assignment(cls, assignment) -> "SuperpointPartition":
        """Build member lists from a per-point superpoint id array.

        Ids may be arbitrary; they are compressed to 0..S-1 preserving order.
        """
        a = np.asarray(assignment, dtype=np.int64).ravel()
        if a.size == 0:
            raise DataError("assignment is empty")
        if a.min() < 0:
            raise DataError("assignment contains negative superpoint ids")
        _, inverse = np.unique(a, return_inverse=True)
        order = np.argsort(inverse, kind="stable")
        splits = np.searchsorted(inverse[order], np.arange(1, inverse.max() + 1))
        members = np.split(order, splits)
        return cls(tuple(members), num_points=a.size)

    @cached_property
    def assignment(self) -> np.ndarray:
        """Per-point superpoint id; -1 for points in no member list."""
        a = np.full(self.num_points, -1, dtype=np.int64)
        for sid, members in enumerate(self.superpoints):
            a[members] = sid
        return _readonly(a)

    @cached_property
    def sizes(self) -> np.ndarray:
        return _readonly(np.array([len(m) for m in self.superpoints], dtype=np.int64))

    def __len__(self) -> int:
        return len(self.superpoints)


@dataclass(frozen=True)
class Prediction:
    """Per-point class probabilities, argmax labels, and feature rows."""

    probs: np.ndarray
    pred_labels: np.ndarray
    features: np.ndarray

    def __post_init__(self):
        probs = check_prob_rows(self.probs)
        labels = np.asarray(self.pred_labels, dtype=np.int64)
        feats = np.asarray(self.features, dtype=np.float64)
        if labels.shape != (probs.shape[0],):
            raise DataError("pred_labels length does not match probs")
        if feats.ndim != 2 or feats.shape[0] != probs.shape[0]:
            raise DataError("features must be (N, d) aligned with probs")
        if not np.isfinite(feats).all():
            raise DataError("features contain non-finite values")
        # argmax with ties broken toward the lowest class id
        if probs.size and not np.array_equal(labels, probs.argmax(axis=1)):
            raise DataError("pred_labels must equal the row argmax (lowest id on ties)")
        object.__setattr__(self, "probs", _readonly(probs))
        object.__setattr__(self, "pred_labels", _readonly(labels))
        object.__setattr__(self, "features", _readonly(feats))

    @classmethod
    def from_probs(cls, probs, features) -> "Prediction":
        p = check_prob_rows(probs)
        return cls(p, p.argmax(axis=1), features)

    @property
    def num_classes(self) -> int:
        return self.probs.shape[1]


@dataclass
class PartitionReport:
    """Violations of the partition invariants; all lists empty iff valid."""

    uncovered_points: list[int] = field(default_factory=list)
    overlapping_points: list[int] = field(default_factory=list)
    empty_superpoints: list[int] = field(default_factory=list)
    out_of_range_indices: list[int] = field(default_factory=list)

    @property
    def is_valid(self) -> bool:
        return not (
            self.uncovered_points
            or self.overlapping_points
            or self.empty_superpoints
            or self.out_of_range_indices
        )

    def violations(self) -> list[str]:
        out = []
        if self.uncovered_points:
            out.append(f"{len(self.uncovered_points)} points in no superpoint")
        if self.overlapping_points:
            out.append(f"{len(self.overlapping_points)} points in more than one superpoint")
        if self.empty_superpoints:
            out.append(f"{len(self.empty_superpoints)} empty superpoints")
        if self.out_of_range_indices:
            out.append(f"{len(self.out_of_range_indices)} member indices out of range")
        return out


def validate_partition(partition: SuperpointPartition, cloud: PointCloud | int) -> PartitionReport:
    """Check coverage, disjointness, and non-emptiness; violations are data."""
    n = cloud if isinstance(cloud, int) else len(cloud)
    report = PartitionReport()
    counts = np.zeros(n, dtype=np.int64)
    for sid, members in enumerate(partition.superpoints):
        if len(members) == 0:
            report.empty_superpoints.append(sid)
            continue
        in_range = (members >= 0) & (members < n)
        if not in_range.all():
            report.out_of_range_indices.extend(int(i) for i in members[~in_range])
        np.add.at(counts, members[in_range], 1)
    report.uncovered_points = [int(i) for i in np.nonzero(counts == 0)[0]]
    report.overlapping_points = [int(i) for i in np.nonzero(counts > 1)[0]]
    return report


def _parse_line(fields: list[str], lineno: int, path: str, num_classes: int):
    try:
        xyz = [float(fields[0]), float(fields[1]), float(fields[2])]
        rgb = [float(fields[3]), float(fields[4]), float(fields[5])]
        label = int(fields[6])
    except ValueError as exc:
        raise DataError(f"{path}:{lineno}: malformed line ({exc})") from None
    if not all(np.isfinite(v) for v in xyz + rgb):
        raise DataError(f"{path}:{lineno}: non-finite value")
    if label < 0 or label >= num_classes:
        raise DataError(f"{path}:{lineno}: label {label} outside [0, {num_classes})")
    sp = None
    if len(fields) == 8:
        try:
            sp = int(fields[7])
        except ValueError:
            raise DataError(f"{path}:{lineno}: malformed superpoint id {fields[7]!r}") from None
        if sp < 0:
            raise DataError(f"{path}:{lineno}: negative superpoint id {sp}")
    return xyz, rgb, label, sp


def read_cloud_file(path, num_classes: int):
    """Load a cloud file; returns (PointCloud, SuperpointPartition | None).

    The partition is present iff every line carries the 8th column.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    positions, colors, labels, sp_ids = [], [], [], []
    ncols = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            fields = stripped.split()
            if len(fields) not in (7, 8):
                raise DataError(
                    f"{path}:{lineno}: expected 7 or 8 fields, got {len(fields)}"
                )
            if ncols is None:
                ncols = len(fields)
            elif len(fields) != ncols:
                raise DataError(f"{path}:{lineno}: inconsistent column count")
            xyz, rgb, label, sp = _parse_line(fields, lineno, str(path), num_classes)
            positions.append(xyz)
            colors.append(rgb)
            labels.append(label)
            if sp is not None:
                sp_ids.append(sp)
    if not positions:
        raise DataError(f"{path}: no data lines")
    col = np.asarray(colors, dtype=np.float64)
    if col.max() > 1.0:
        col = col / 255.0
    cloud = PointCloud(np.asarray(positions), col, np.asarray(labels), num_classes)
    partition = None
    if ncols == 8:
        partition = SuperpointPartition.from_assignment(np.asarray(sp_ids))
    return cloud, partition


def load_point_cloud(path, num_classes: int) -> PointCloud:
    """Load a cloud file, ignoring any superpoint column."""
    cloud, _ = read_cloud_file(path, num_classes)
    return cloud


def save_point_cloud(path, cloud: PointCloud, partition: SuperpointPartition | None = None):
    """Write the text format; appends the superpoint column when given."""
    assignment = None
    if partition is not None:
        if partition.num_points != len(cloud):
            raise DataError("partition size does not match cloud")
        assignment = partition.assignment
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(len(cloud)):
            vals = [FLOAT_FORMAT % v for v in cloud.positions[i]]
            vals += [FLOAT_FORMAT % v for v in cloud.colors[i]]
            vals.append(str(int(cloud.gt_labels[i])))
            if assignment is not None:
                vals.append(str(int(assignment[i])))
            fh.write(" ".join(vals) + "\n")
