import math

import numpy as np
import pytest

from ssdral.errors import DataError
from ssdral.scoring import (
    bvsb_uncertainty,
    class_weights,
    classbal_rank,
    entropy_uncertainty,
    least_confidence,
    random_select,
    region_margin_uncertainty,
    region_mean_uncertainty,
)


def random_prob_rows(n, c, rng):
    p = rng.uniform(0, 1, (n, c)) + 1e-9
    return p / p.sum(axis=1, keepdims=True)


class TestPointScores:
    def test_bvsb_fixtures(self):
        assert bvsb_uncertainty([1.0, 0.0, 0.0]) == 0.0
        assert bvsb_uncertainty([0.5, 0.5]) == 1.0
        assert abs(bvsb_uncertainty([0.6, 0.3, 0.1]) - 0.5) < 1e-12

    def test_entropy_fixtures(self):
        assert entropy_uncertainty([1.0, 0.0]) == 0.0
        assert abs(entropy_uncertainty([0.25] * 4) - math.log(4)) < 1e-9
        assert abs(entropy_uncertainty([0.5, 0.5]) - math.log(2)) < 1e-9

    def test_lc_fixtures(self):
        assert least_confidence([1.0, 0.0, 0.0]) == 0.0
        assert abs(least_confidence([0.7, 0.2, 0.1]) - 0.3) < 1e-12
        assert least_confidence([0.5, 0.5]) == 0.5

    def test_unnormalized_rejected(self):
        for fn in (bvsb_uncertainty, entropy_uncertainty, least_confidence):
            with pytest.raises(DataError):
                fn([0.5, 0.4])

    def test_score_ranges(self):
        rng = np.random.default_rng(0)
        for c in (2, 3, 7):
            p = random_prob_rows(200, c, rng)
            assert np.all((bvsb_uncertainty(p) >= 0) & (bvsb_uncertainty(p) <= 1))
            assert np.all((least_confidence(p) >= 0) & (least_confidence(p) <= 1))
            e = entropy_uncertainty(p)
            assert np.all((e >= 0) & (e <= math.log(c) + 1e-12))

    def test_invariant_under_nontop_permutation(self):
        # any permutation preserves the sorted probability multiset
        rng = np.random.default_rng(1)
        row = random_prob_rows(1, 6, rng)[0]
        base = (bvsb_uncertainty(row), least_confidence(row), entropy_uncertainty(row))
        for _ in range(10):
            perm = rng.permutation(row)
            got = (bvsb_uncertainty(perm), least_confidence(perm), entropy_uncertainty(perm))
            assert np.allclose(got, base)


class TestRegionScores:
    def test_mean_fixtures(self):
        assert region_mean_uncertainty([0.0, 0.0, 0.0], [0, 1, 2]) == 0.0
        assert abs(region_mean_uncertainty([0.2, 0.4], [0, 1]) - 0.3) < 1e-12
        assert region_mean_uncertainty([1.0], [0]) == 1.0

    def test_margin_all_dominant(self):
        u = [0.2, 0.3]
        assert abs(region_margin_uncertainty(u, [1, 1], [0, 1]) - 0.5) < 1e-12

    def test_margin_mixed(self):
        u = [0.4, 0.3, 0.2]
        preds = [1, 1, 2]
        assert abs(region_margin_uncertainty(u, preds, [0, 1, 2]) - 0.5) < 1e-12

    def test_margin_symmetric_cancellation(self):
        u = [0.1, 0.1, 0.1, 0.1]
        preds = [0, 0, 1, 1]
        assert region_margin_uncertainty(u, preds, [0, 1, 2, 3]) == 0.0

    def test_margin_equals_size_times_mean_when_pure(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(1, 30))
            u = rng.uniform(0, 1, n)
            preds = np.full(n, int(rng.integers(0, 4)))
            region = np.arange(n)
            margin = region_margin_uncertainty(u, preds, region)
            mean = region_mean_uncertainty(u, region)
            assert margin == pytest.approx(n * mean, rel=1e-12)

    def test_empty_region_errors(self):
        with pytest.raises(DataError):
            region_mean_uncertainty([0.1], [])
        with pytest.raises(DataError):
            region_margin_uncertainty([0.1], [0], [])


class TestClassWeights:
    def test_absent_class(self):
        w = class_weights([0, 0], 3)
        assert w[1] == 1.0 and w[2] == 1.0

    def test_all_one_class(self):
        assert abs(class_weights([2, 2, 2], 3)[2] - 0.367879) < 1e-6

    def test_half(self):
        assert abs(class_weights([1, 1, 0, 2], 3)[1] - 0.606531) < 1e-6

    def test_bounds(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            dom = rng.integers(0, 5, int(rng.integers(1, 40)))
            w = class_weights(dom, 5)
            assert np.all(w >= math.exp(-1) - 1e-12)
            assert np.all(w <= 1.0)

    def test_monotone_in_count(self):
        # adding superpoints of class c never increases w(c)
        rng = np.random.default_rng(5)
        dom = list(rng.integers(0, 3, 10))
        w_before = class_weights(dom, 3)[1]
        w_after = class_weights(dom + [1], 3)[1]
        assert w_after <= w_before + 1e-15

    def test_empty_pool(self):
        with pytest.raises(DataError):
            class_weights([], 3)


class TestClassBalRank:
    def test_unit_weight(self):
        ranked = classbal_rank([0], [0.5], [1], np.ones(3), 1)
        assert ranked[0].score == 0.5

    def test_weight_flips_order(self):
        # s0: u=0.5 w=exp(-1)=0.367879 -> 0.183940 ; s1: u=0.2 w=1 -> 0.2
        weights = np.array([math.exp(-1), 1.0])
        ranked = classbal_rank([0, 1], [0.5, 0.2], [0, 1], weights, 2)
        assert [r.superpoint_id for r in ranked] == [1, 0]
        assert ranked[0].score == pytest.approx(0.2)
        assert ranked[1].score == pytest.approx(0.5 * math.exp(-1))

    def test_saturation(self):
        ranked = classbal_rank([3, 1, 2], [0.1, 0.2, 0.3], [0, 0, 0], np.ones(1), 10)
        assert len(ranked) == 3

    def test_tie_lower_id(self):
        ranked = classbal_rank([5, 2], [0.4, 0.4], [0, 0], np.ones(1), 2)
        assert [r.superpoint_id for r in ranked] == [2, 5]

    def test_score_is_product(self):
        rng = np.random.default_rng(6)
        u = rng.uniform(-1, 1, 20)
        dom = rng.integers(0, 4, 20)
        w = class_weights(dom, 4)
        for r in classbal_rank(np.arange(20), u, dom, w, 20):
            assert r.score == pytest.approx(r.uncertainty * w[r.dominant_pred])

    def test_order_invariant_under_positive_scaling(self):
        rng = np.random.default_rng(7)
        u = rng.uniform(0, 1, 30)
        dom = rng.integers(0, 3, 30)
        w = class_weights(dom, 3)
        base = [r.superpoint_id for r in classbal_rank(np.arange(30), u, dom, w, 30)]
        scaled = [r.superpoint_id for r in classbal_rank(np.arange(30), 7.5 * u, dom, w, 30)]
        assert base == scaled

    def test_empty_pool(self):
        with pytest.raises(DataError):
            classbal_rank([], [], [], np.ones(2), 1)


class TestRandomSelect:
    def test_whole_pool(self):
        got = random_select([4, 7, 9], 3, 0)
        assert sorted(got) == [4, 7, 9]

    def test_deterministic(self):
        pool = np.arange(50)
        assert random_select(pool, 10, 123) == random_select(pool, 10, 123)

    def test_over_budget(self):
        with pytest.raises(DataError):
            random_select([1, 2], 3, 0)

    def test_uniform_law(self):
        # 1e5 draws of B=1 from 4 items: frequencies within +/-2% of 0.25
        rng = np.random.default_rng(42)
        counts = np.zeros(4)
        for _ in range(10**5):
            counts[random_select([0, 1, 2, 3], 1, rng)[0]] += 1
        freqs = counts / counts.sum()
        assert np.all(np.abs(freqs - 0.25) < 0.02)
