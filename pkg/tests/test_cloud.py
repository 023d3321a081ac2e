import numpy as np
import pytest

from ssdral.cloud import (
    DataError,
    PointCloud,
    Prediction,
    SuperpointPartition,
    load_point_cloud,
    read_cloud_file,
    save_point_cloud,
    validate_partition,
)


def make_cloud(n=10, num_classes=3, seed=0):
    rng = np.random.default_rng(seed)
    return PointCloud(
        positions=rng.uniform(-5, 5, (n, 3)),
        colors=rng.uniform(0, 1, (n, 3)),
        gt_labels=rng.integers(0, num_classes, n),
        num_classes=num_classes,
    )


class TestPointCloud:
    def test_basic_construction(self):
        cloud = make_cloud(4)
        assert len(cloud) == 4
        assert not cloud.positions.flags.writeable

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            PointCloud(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0, dtype=int), 2)

    def test_label_out_of_range(self):
        with pytest.raises(DataError):
            PointCloud(np.zeros((1, 3)), np.zeros((1, 3)), [5], 3)

    def test_non_finite_rejected(self):
        with pytest.raises(DataError):
            PointCloud([[0, 0, np.nan]], [[0, 0, 0]], [0], 2)

    def test_color_range(self):
        with pytest.raises(DataError):
            PointCloud([[0, 0, 0]], [[0, 0, 1.5]], [0], 2)


class TestLoadSave:
    def test_example_line(self, tmp_path):
        # "0 0 0 255 0 0 2" with C=3: origin, color (1,0,0), label 2
        path = tmp_path / "one.txt"
        path.write_text("0 0 0 255 0 0 2\n")
        cloud = load_point_cloud(path, 3)
        assert np.allclose(cloud.positions[0], [0, 0, 0])
        assert np.allclose(cloud.colors[0], [1, 0, 0])
        assert cloud.gt_labels[0] == 2

    def test_malformed_line_reports_lineno(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("0 0 0 1 1 1 0\n0 0 x 1 1 1 0\n")
        with pytest.raises(DataError, match=":2"):
            load_point_cloud(path, 2)

    def test_seven_column_count(self, tmp_path):
        # 100 data lines -> 100 points, no partition attached
        path = tmp_path / "hundred.txt"
        rng = np.random.default_rng(1)
        lines = ["# comment"]
        for _ in range(100):
            x, y, z = rng.uniform(0, 1, 3)
            lines.append(f"{x} {y} {z} 0.5 0.5 0.5 1")
        path.write_text("\n".join(lines) + "\n")
        cloud, partition = read_cloud_file(path, 2)
        assert len(cloud) == 100
        assert partition is None

    def test_label_above_num_classes(self, tmp_path):
        path = tmp_path / "big.txt"
        path.write_text("0 0 0 1 1 1 7\n")
        with pytest.raises(DataError):
            load_point_cloud(path, 3)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("# nothing here\n")
        with pytest.raises(DataError):
            load_point_cloud(path, 2)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_point_cloud(tmp_path / "nope.txt", 2)

    def test_inconsistent_columns(self, tmp_path):
        path = tmp_path / "mixed.txt"
        path.write_text("0 0 0 1 1 1 0 0\n0 0 0 1 1 1 0\n")
        with pytest.raises(DataError):
            read_cloud_file(path, 2)

    def test_round_trip_bit_exact(self, tmp_path):
        cloud = make_cloud(50, seed=3)
        p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
        save_point_cloud(p1, cloud)
        loaded = load_point_cloud(p1, cloud.num_classes)
        save_point_cloud(p2, loaded)
        assert p1.read_bytes() == p2.read_bytes()

    def test_round_trip_with_partition(self, tmp_path):
        cloud = make_cloud(30, seed=4)
        partition = SuperpointPartition.from_assignment(np.arange(30) % 5)
        path = tmp_path / "sp.txt"
        save_point_cloud(path, cloud, partition)
        loaded, loaded_partition = read_cloud_file(path, cloud.num_classes)
        assert loaded_partition is not None
        assert np.array_equal(loaded_partition.assignment, partition.assignment)


class TestPartitionType:
    def test_from_assignment_sizes(self):
        partition = SuperpointPartition.from_assignment([0, 1, 0, 2, 1, 0])
        assert len(partition) == 3
        assert partition.sizes.tolist() == [3, 2, 1]
        assert partition.sizes.sum() == partition.num_points

    def test_sizes_sum_property(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            n = int(rng.integers(1, 200))
            assignment = rng.integers(0, max(1, n // 4), n)
            partition = SuperpointPartition.from_assignment(assignment)
            assert partition.sizes.sum() == n

    def test_identity_partition_valid(self):
        cloud = make_cloud(8)
        partition = SuperpointPartition.from_assignment(np.arange(8))
        report = validate_partition(partition, cloud)
        assert report.is_valid
        assert report.violations() == []

    def test_overlap_detected(self):
        cloud = make_cloud(4)
        partition = SuperpointPartition(
            (np.array([0, 1]), np.array([1, 2, 3])), num_points=4
        )
        report = validate_partition(partition, cloud)
        assert report.overlapping_points == [1]
        assert not report.is_valid

    def test_coverage_violation(self):
        cloud = make_cloud(4)
        partition = SuperpointPartition((np.array([0, 1]), np.array([3]),), num_points=4)
        report = validate_partition(partition, cloud)
        assert report.uncovered_points == [2]

    def test_empty_superpoint(self):
        cloud = make_cloud(2)
        partition = SuperpointPartition(
            (np.array([0, 1]), np.array([], dtype=int)), num_points=2
        )
        report = validate_partition(partition, cloud)
        assert report.empty_superpoints == [1]


class TestPrediction:
    def test_rows_must_normalize(self):
        with pytest.raises(DataError):
            Prediction.from_probs([[0.5, 0.4]], np.zeros((1, 2)))

    def test_argmax_tie_lowest(self):
        pred = Prediction.from_probs([[0.5, 0.5]], np.zeros((1, 2)))
        assert pred.pred_labels[0] == 0

    def test_label_mismatch_rejected(self):
        with pytest.raises(DataError):
            Prediction([[0.9, 0.1]], [1], np.zeros((1, 2)))
