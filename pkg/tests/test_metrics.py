import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vcarm.metrics import MetricError, Metrics, auc, ici, loess_smooth


def brute_force_auc(scores, labels):
    scores = np.asarray(scores, float)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos) * len(neg))


class TestAuc:
    def test_perfect_separation(self):
        assert auc([0.9, 0.8, 0.3, 0.2], [1, 1, 0, 0]) == 1.0

    def test_full_tie(self):
        assert auc([0.5, 0.5], [1, 0]) == 0.5

    def test_two_pair_case(self):
        # one win, one loss over the 2 (pos, neg) pairs
        assert auc([0.3, 0.6, 0.8], [0, 1, 0]) == 0.5

    def test_matches_brute_force_on_random_instances(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = rng.integers(2, 13)
            labels = np.zeros(n, dtype=int)
            labels[rng.integers(1, n)] = 0
            while labels.sum() in (0, n):
                labels = rng.integers(0, 2, n)
            scores = np.round(rng.random(n), 1)  # coarse grid forces ties
            assert auc(scores, labels) == pytest.approx(
                brute_force_auc(scores, labels), abs=1e-12
            )

    def test_single_class_rejected(self):
        with pytest.raises(MetricError):
            auc([0.1, 0.2], [1, 1])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000))
    def test_invariant_under_increasing_transform(self, seed):
        rng = np.random.default_rng(seed)
        n = 30
        scores = rng.random(n)
        labels = rng.integers(0, 2, n)
        if labels.sum() in (0, n):
            labels[0] = 1 - labels[0]
        transformed = np.exp(3 * scores) + 5
        assert auc(scores, labels) == pytest.approx(auc(transformed, labels), abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000))
    def test_label_flip_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        n = 25
        scores = np.round(rng.random(n), 1)
        labels = rng.integers(0, 2, n)
        if labels.sum() in (0, n):
            labels[0] = 1 - labels[0]
        assert auc(scores, labels) + auc(scores, 1 - labels) == pytest.approx(1.0)


class TestIci:
    def test_constant_probs_at_prevalence(self):
        labels = np.tile([0, 1, 1, 0], 10)
        probs = np.full(40, labels.mean())
        assert ici(probs, labels) == pytest.approx(0.0, abs=1e-12)

    def test_calibrated_simulation_floor(self):
        rng = np.random.default_rng(1)
        n = 10_000
        probs = rng.uniform(0.05, 0.95, n)
        labels = (rng.random(n) < probs).astype(int)
        assert ici(probs, labels) < 0.02

    def test_probs_equal_labels_near_zero(self):
        rng = np.random.default_rng(2)
        labels = rng.integers(0, 2, 500)
        if labels.sum() in (0, 500):
            labels[0] = 1 - labels[0]
        assert ici(labels.astype(float), labels) <= 0.05

    def test_nonnegative(self):
        rng = np.random.default_rng(3)
        for seed in range(5):
            rng = np.random.default_rng(seed)
            probs = rng.random(100)
            labels = rng.integers(0, 2, 100)
            if labels.sum() in (0, 100):
                labels[0] = 1 - labels[0]
            assert ici(probs, labels) >= 0.0

    def test_recalibration_reduces_ici(self):
        # miscalibrated probs (squared); mapping them back should win most of 20 replicates
        wins = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            n = 2000
            true_p = rng.uniform(0.1, 0.9, n)
            labels = (rng.random(n) < true_p).astype(int)
            miscal = true_p**2
            if ici(true_p, labels) < ici(miscal, labels):
                wins += 1
        assert wins >= 15

    def test_requires_20_observations(self):
        with pytest.raises(MetricError):
            ici([0.5] * 10, [0, 1] * 5)


class TestLoess:
    def test_recovers_linear_trend(self):
        rng = np.random.default_rng(4)
        x = rng.uniform(0, 1, 400)
        y = 2 * x + 0.3 + rng.normal(0, 0.05, 400)
        smoothed = loess_smooth(x, y)
        assert np.max(np.abs(smoothed - (2 * x + 0.3))) < 0.1


class TestMetricsAggregate:
    def test_fold_means(self):
        m = Metrics.from_folds([(0.6, 0.1), (0.7, 0.2)])
        assert m.auc == pytest.approx(0.65)
        assert m.ici == pytest.approx(0.15)
        assert len(m.fold_values) == 2
