import math

import numpy as np
import pytest

from ssdral.cloud import Prediction
from ssdral.errors import DataError
from ssdral.graph import (
    SuperpointFeature,
    aggregate,
    build_graph,
    chamfer_distance,
    edge_weight,
    fps_select,
    location_distance,
    superpoint_feature,
)


def chamfer_oracle(a, b):
    """O(n*m) double-loop evaluation of the squared-distance chamfer formula."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    fwd = sum(min(((p - q) ** 2).sum() for q in b) for p in a) / len(a)
    bwd = sum(min(((q - p) ** 2).sum() for p in a) for q in b) / len(b)
    return fwd + bwd


def fps_oracle(features, count, start):
    """Greedy max-min selection, recomputed from scratch each step."""
    f = np.asarray(features, float)
    selected = [start]
    while len(selected) < count:
        best_idx, best_gain = None, -1.0
        for i in range(len(f)):
            if i in selected:
                continue
            gain = min(((f[i] - f[j]) ** 2).sum() for j in selected)
            if gain > best_gain:
                best_idx, best_gain = i, gain
        if best_idx is None:  # only duplicates of selected rows remain
            best_idx = next(i for i in range(len(f)) if i not in selected)
        selected.append(best_idx)
    return selected


def node(sid, f, centroid, points):
    return SuperpointFeature(sid, np.asarray(f, float), np.asarray(centroid, float),
                             np.asarray(points, float))


class TestSuperpointFeature:
    def _prediction(self, probs, features):
        return Prediction.from_probs(probs, features)

    def test_all_same_class(self):
        pred = self._prediction([[0.9, 0.1], [0.8, 0.2]], [[1, 0], [3, 0]])
        feat = superpoint_feature([0, 1], pred, [[0, 0, 0], [2, 0, 0]], 7)
        assert np.allclose(feat.f, [2, 0])
        assert np.allclose(feat.centroid, [1, 0, 0])
        assert feat.superpoint_id == 7

    def test_minority_excluded(self):
        probs = [[0.9, 0.1], [0.8, 0.2], [0.1, 0.9]]
        features = [[1, 1], [3, 1], [100, 100]]
        pred = self._prediction(probs, features)
        feat = superpoint_feature([0, 1, 2], pred, np.zeros((3, 3)), 0)
        assert np.allclose(feat.f, [2, 1])

    def test_singleton(self):
        pred = self._prediction([[0.2, 0.8]], [[5, 6]])
        feat = superpoint_feature([0], pred, [[1, 2, 3]], 0)
        assert np.allclose(feat.f, [5, 6])

    def test_centroid_uses_whole_region(self):
        probs = [[0.9, 0.1], [0.1, 0.9]]
        pred = self._prediction(probs, [[0, 0], [10, 10]])
        feat = superpoint_feature([0, 1], pred, [[0, 0, 0], [4, 0, 0]], 0)
        assert np.allclose(feat.centroid, [2, 0, 0])


class TestDistances:
    def test_location_identity(self):
        a = node(0, [0], [1, 2, 3], [[1, 2, 3]])
        assert location_distance(a, a) == 0.0

    def test_location_345(self):
        a = node(0, [0], [0, 0, 0], [[0, 0, 0]])
        b = node(1, [0], [3, 4, 0], [[3, 4, 0]])
        assert location_distance(a, b) == 5.0
        assert location_distance(b, a) == 5.0

    def test_chamfer_identical_sets(self):
        pts = np.random.default_rng(0).uniform(0, 1, (20, 3))
        assert chamfer_distance(pts, pts) == 0.0

    def test_chamfer_fixtures(self):
        assert chamfer_distance([[0, 0, 0]], [[1, 0, 0], [0, 1, 0]]) == 2.0
        assert chamfer_distance([[0, 0, 0]], [[2, 0, 0]]) == 8.0

    def test_chamfer_matches_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            a = rng.uniform(0, 10, (int(rng.integers(1, 40)), 3))
            b = rng.uniform(0, 10, (int(rng.integers(1, 40)), 3))
            expected = chamfer_oracle(a, b)
            for method in ("brute", "tree"):
                got = chamfer_distance(a, b, method=method)
                assert got == pytest.approx(expected, rel=1e-9)

    def test_chamfer_symmetric_nonneg_zero_iff_equal(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            a = rng.uniform(0, 5, (int(rng.integers(1, 25)), 3))
            b = rng.uniform(0, 5, (int(rng.integers(1, 25)), 3))
            d_ab = chamfer_distance(a, b)
            assert d_ab >= 0.0
            assert d_ab == pytest.approx(chamfer_distance(b, a), rel=1e-12)
            if d_ab == 0.0:
                assert {tuple(p) for p in a} == {tuple(p) for p in b}

    def test_chamfer_empty_errors(self):
        with pytest.raises(DataError):
            chamfer_distance(np.zeros((0, 3)), np.zeros((1, 3)))


class TestEdgeWeight:
    def test_fixtures(self):
        assert edge_weight(0.0, 0.0) == 1.0
        assert abs(edge_weight(1.0, 2.0) - 0.049787) < 1e-6

    def test_monotone(self):
        assert edge_weight(1.0, 0.0) > edge_weight(2.0, 0.0)
        assert edge_weight(0.0, 1.0) > edge_weight(0.0, 2.0)

    def test_always_positive(self):
        assert edge_weight(500.0, 500.0) > 0.0

    def test_invalid_inputs(self):
        with pytest.raises(DataError):
            edge_weight(-1.0, 0.0)
        with pytest.raises(DataError):
            edge_weight(0.0, float("inf"))


class TestBuildGraph:
    def test_single_node(self):
        g = build_graph([node(3, [1.0], [0, 0, 0], [[0, 0, 0]])], k=5)
        assert len(g) == 1
        assert list(g.edges()) == []
        assert g.neighbors(0) == [0]

    def test_chain_knn_union(self):
        # three collinear nodes; k=1 connects each to its nearest, the union
        # keeps the middle connected to both ends only via symmetrization
        nodes = [
            node(0, [0.0], [0, 0, 0], [[0, 0, 0]]),
            node(1, [0.0], [1, 0, 0], [[1, 0, 0]]),
            node(2, [0.0], [2.5, 0, 0], [[2.5, 0, 0]]),
        ]
        g = build_graph(nodes, k=1)
        # directed picks: 0->1, 1->0, 2->1; union = {01, 12}
        edges = {(i, j) for i, j, _ in g.edges()}
        assert edges == {(0, 1), (1, 2)}
        # D_l = 1 and D_c = 1^2 + 1^2 = 2 between nodes 0 and 1
        assert g.weights[0, 1] == pytest.approx(math.exp(-3.0))

    def test_weight_matrix_symmetric_in_range(self):
        rng = np.random.default_rng(3)
        nodes = [
            node(i, rng.uniform(0, 1, 4), rng.uniform(0, 3, 3), rng.uniform(0, 3, (5, 3)))
            for i in range(12)
        ]
        g = build_graph(nodes, k=4)
        assert np.array_equal(g.weights, g.weights.T)
        nz = g.weights[g.weights > 0]
        assert np.all(nz <= 1.0)
        assert np.all(np.diag(g.weights) == 0.0)

    def test_k_clamped(self):
        nodes = [node(i, [float(i)], [i, 0, 0], [[i, 0, 0]]) for i in range(3)]
        g = build_graph(nodes, k=99)
        assert len(list(g.edges())) == 3  # complete graph on 3 nodes


class TestAggregate:
    def test_isolated_node_keeps_feature(self):
        g = build_graph([node(0, [2.0, 3.0], [0, 0, 0], [[0, 0, 0]])], k=0)
        merged = aggregate(g, rounds=1)
        assert np.allclose(merged, [[2.0, 3.0]])

    def test_weighted_sum_example(self):
        # node i: f=[1,0]; one neighbor j with w=0.5, f=[0,2] -> f*_i = [1,1]
        from ssdral.graph import SuperpointGraph

        weights = np.array([[0.0, 0.5], [0.5, 0.0]])
        g = SuperpointGraph((0, 1), np.array([[1.0, 0.0], [0.0, 2.0]]), weights)
        merged = aggregate(g, rounds=1)
        assert np.allclose(merged[0], [1.0, 1.0])

    def test_zero_features(self):
        rng = np.random.default_rng(4)
        nodes = [node(i, np.zeros(3), rng.uniform(0, 1, 3), rng.uniform(0, 1, (4, 3)))
                 for i in range(6)]
        merged = aggregate(build_graph(nodes, k=3), rounds=2)
        assert np.allclose(merged, 0.0)

    def test_linearity(self):
        rng = np.random.default_rng(5)
        nodes = [node(i, rng.uniform(0, 1, 3), rng.uniform(0, 2, 3), rng.uniform(0, 2, (4, 3)))
                 for i in range(8)]
        g = build_graph(nodes, k=3)
        f = g.features
        other = rng.uniform(-1, 1, f.shape)
        g_f = aggregate(g, rounds=1)
        g_other = aggregate(
            type(g)(g.node_ids, other, g.weights), rounds=1
        )
        combo = aggregate(type(g)(g.node_ids, 2.0 * f + 3.0 * other, g.weights), rounds=1)
        assert np.allclose(combo, 2.0 * g_f + 3.0 * g_other)

    def test_identical_neighborhoods_identical_merge(self):
        # two nodes with the same neighbors, weights, and features merge equally
        ids = (0, 1, 2)
        feats = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 4.0]])
        w = np.zeros((3, 3))
        w[0, 2] = w[2, 0] = 0.5
        w[1, 2] = w[2, 1] = 0.5
        from ssdral.graph import SuperpointGraph

        g = SuperpointGraph(ids, feats, w)
        merged = aggregate(g, rounds=1)
        assert np.allclose(merged[0], merged[1])

    def test_agg_subset_keeps_rest(self):
        rng = np.random.default_rng(6)
        nodes = [node(i, rng.uniform(0, 1, 2), rng.uniform(0, 1, 3), rng.uniform(0, 1, (3, 3)))
                 for i in range(5)]
        g = build_graph(nodes, k=2)
        merged = aggregate(g, rounds=1, agg_nodes=2)
        assert np.allclose(merged[2:], g.features[2:])
        full = aggregate(g, rounds=1, agg_nodes="all")
        assert np.allclose(merged[:2], full[:2])

    def test_normalize_flag(self):
        rng = np.random.default_rng(7)
        nodes = [node(i, rng.uniform(0, 1, 2), rng.uniform(0, 1, 3), rng.uniform(0, 1, (3, 3)))
                 for i in range(4)]
        g = build_graph(nodes, k=2)
        normalized = aggregate(g, rounds=1, normalize=True)
        w_self = g.weights + np.eye(len(g))
        expected = (w_self @ g.features) / w_self.sum(axis=1, keepdims=True)
        assert np.allclose(normalized, expected)

    def test_rounds_compose(self):
        rng = np.random.default_rng(8)
        nodes = [node(i, rng.uniform(0, 1, 2), rng.uniform(0, 1, 3), rng.uniform(0, 1, (3, 3)))
                 for i in range(5)]
        g = build_graph(nodes, k=2)
        two = aggregate(g, rounds=2)
        one = aggregate(g, rounds=1)
        from ssdral.graph import SuperpointGraph

        again = aggregate(SuperpointGraph(g.node_ids, one, g.weights), rounds=1)
        assert np.allclose(two, again)


class TestFps:
    def test_all_rows(self):
        f = np.arange(5, dtype=float).reshape(-1, 1)
        got = fps_select(f, 5, start=0)
        assert sorted(got) == [0, 1, 2, 3, 4]

    def test_scalar_fixture(self):
        f = np.array([[0.0], [1.0], [2.0], [3.0]])
        assert fps_select(f, 3, start=0) == [0, 3, 1]

    def test_duplicates_deferred(self):
        f = np.array([[0.0], [0.0], [1.0], [2.0]])
        got = fps_select(f, 4, start=0)
        # the duplicate of row 0 comes last, after all distinct rows
        assert got[-1] == 1

    def test_matches_oracle(self):
        rng = np.random.default_rng(9)
        for _ in range(25):
            n = int(rng.integers(2, 40))
            d = int(rng.integers(1, 6))
            f = rng.uniform(-1, 1, (n, d))
            count = int(rng.integers(1, n + 1))
            start = int(rng.integers(0, n))
            assert fps_select(f, count, start) == fps_oracle(f, count, start)

    def test_count_out_of_range(self):
        with pytest.raises(DataError):
            fps_select(np.zeros((3, 2)), 4, 0)
        with pytest.raises(DataError):
            fps_select(np.zeros((3, 2)), 0, 0)
