import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgae.evaluation import (
    adjusted_rand_index,
    clustering_metrics,
    kmeans,
    latent_correlation,
    mean_stderr,
    munkres_match,
    normalized_mutual_info,
    rank_metrics,
)
from tests.oracles import brute_force_matching, pair_counting_ari, pairwise_auc, rank_ap


class TestRankMetrics:
    def test_worked_example(self):
        auc, ap = rank_metrics([0.9, 0.8], [0.7, 0.85])
        assert abs(auc - 0.75) < 1e-12
        assert abs(ap - 5.0 / 6.0) < 1e-12

    def test_perfect_separation(self):
        auc, ap = rank_metrics([0.9, 0.8, 0.7], [0.3, 0.2])
        assert auc == 1.0 and ap == 1.0

    def test_empty_lists_rejected(self):
        with pytest.raises(ValueError):
            rank_metrics([], [0.5])
        with pytest.raises(ValueError):
            rank_metrics([0.5], [])

    @given(st.integers(0, 2**32 - 1), st.booleans())
    @settings(max_examples=40, deadline=None)
    def test_matches_brute_force_counting(self, seed, force_ties):
        rng = np.random.default_rng(seed)
        n_pos = int(rng.integers(1, 100))
        n_neg = int(rng.integers(1, 100))
        if force_ties:
            pos = rng.integers(0, 5, n_pos).astype(float)
            neg = rng.integers(0, 5, n_neg).astype(float)
        else:
            pos = rng.standard_normal(n_pos)
            neg = rng.standard_normal(n_neg)
        auc, ap = rank_metrics(pos, neg)
        assert abs(auc - pairwise_auc(pos, neg)) < 1e-12
        assert abs(ap - rank_ap(pos, neg)) < 1e-12


class TestKMeans:
    def test_separated_clouds_recovered(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((40, 2)) * 0.1 + [0.0, 0.0]
        b = rng.standard_normal((40, 2)) * 0.1 + [10.0, 10.0]
        labels = kmeans(np.vstack([a, b]), 2, seed=1)
        assert len(set(labels[:40])) == 1
        assert len(set(labels[40:])) == 1
        assert labels[0] != labels[40]

    def test_single_cluster(self):
        labels = kmeans(np.random.default_rng(1).standard_normal((10, 3)), 1, seed=0)
        assert np.array_equal(labels, np.zeros(10, dtype=int))

    def test_duplicate_points_collapse(self):
        labels = kmeans(np.ones((8, 2)), 2, seed=0)
        assert len(set(labels.tolist())) == 1

    def test_k_larger_than_n_rejected(self):
        with pytest.raises(ValueError):
            kmeans(np.ones((3, 2)), 4, seed=0)

    def test_deterministic(self):
        points = np.random.default_rng(2).standard_normal((50, 4))
        assert np.array_equal(kmeans(points, 5, seed=9), kmeans(points, 5, seed=9))


class TestMunkres:
    def test_relabeled_prediction_recovers_accuracy_one(self):
        true = np.array([0, 0, 1, 1, 2, 2])
        pred = np.array([2, 2, 0, 0, 1, 1])
        mapping = munkres_match(pred, true)
        assert np.array_equal(mapping[pred], true)

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_permutation_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(2, 7))
        n = int(rng.integers(k, 40))
        true = rng.integers(0, k, n)
        true[:k] = np.arange(k)  # every id present
        pred = rng.integers(0, k, n)
        pred[:k] = np.arange(k)
        mapping = munkres_match(pred, true)
        matched = int((mapping[pred] == true).sum())
        best, _ = brute_force_matching(pred, true)
        assert matched == best

    def test_constant_prediction_picks_majority(self):
        true = np.array([0, 1, 1, 1, 2])
        pred = np.zeros(5, dtype=int)
        mapping = munkres_match(pred, true)
        assert mapping[0] == 1

    def test_more_pred_ids_than_true_rejected(self):
        with pytest.raises(ValueError):
            munkres_match(np.array([0, 1, 2]), np.array([0, 1, 1]))


class TestClusteringMetrics:
    def test_identical_labelings_are_perfect(self):
        labels = np.array([0, 0, 1, 2, 2, 1])
        metrics = clustering_metrics(labels, labels)
        for value in metrics.values():
            assert abs(value - 1.0) < 1e-12

    def test_ari_on_fixed_six_points(self):
        a = np.array([0, 0, 1, 1, 2, 2])
        b = np.array([0, 0, 0, 1, 1, 1])
        assert abs(adjusted_rand_index(a, b) - pair_counting_ari(a, b)) < 1e-12
        c = np.array([0, 1, 1, 0, 2, 2])
        assert abs(adjusted_rand_index(a, c) - pair_counting_ari(a, c)) < 1e-12

    def test_random_labels_have_near_zero_ari(self):
        rng = np.random.default_rng(3)
        a = rng.integers(0, 4, 10_000)
        b = rng.integers(0, 4, 10_000)
        assert abs(adjusted_rand_index(a, b)) < 0.05

    def test_relabeling_invariance_after_matching(self):
        rng = np.random.default_rng(4)
        true = rng.integers(0, 3, 60)
        pred = rng.integers(0, 3, 60)
        base = clustering_metrics(munkres_match(pred, true)[pred], true)
        perm = np.array([2, 0, 1])
        relabeled = perm[pred]
        again = clustering_metrics(munkres_match(relabeled, true)[relabeled], true)
        for key in base:
            assert abs(base[key] - again[key]) < 1e-12

    def test_single_class_true_labels_flagged(self):
        with pytest.warns(UserWarning, match="constant"):
            nmi = normalized_mutual_info(np.array([0, 1, 0]), np.array([1, 1, 1]))
        assert nmi == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            clustering_metrics(np.array([0, 1]), np.array([0, 1, 2]))


class TestLatentCorrelation:
    def test_duplicated_columns_correlate_fully(self):
        rng = np.random.default_rng(5)
        col = rng.standard_normal((200, 1))
        z = np.hstack([col, col, rng.standard_normal((200, 1))])
        report = latent_correlation(z)
        assert abs(report.matrix[0, 1] - 1.0) < 1e-9
        assert np.allclose(np.diag(report.matrix), 1.0)

    def test_independent_columns_nearly_uncorrelated(self):
        z = np.random.default_rng(6).standard_normal((10_000, 8))
        report = latent_correlation(z)
        off = report.matrix[~np.eye(8, dtype=bool)]
        assert off.mean() < 0.05

    def test_block_structured_embedding_separates(self):
        rng = np.random.default_rng(7)
        n, width = 2000, 4
        shared = [rng.standard_normal((n, 1)) for _ in range(3)]
        blocks = [s + 0.3 * rng.standard_normal((n, width)) for s in shared]
        report = latent_correlation(np.hstack(blocks), channel_dim=width)
        assert report.block_ratio > 2.0

    def test_zero_variance_column_flagged(self):
        z = np.random.default_rng(8).standard_normal((50, 3))
        z[:, 1] = 4.2
        with pytest.warns(UserWarning, match="zero-variance"):
            report = latent_correlation(z)
        assert np.array_equal(report.matrix[1], np.zeros(3))

    def test_too_few_rows(self):
        with pytest.raises(ValueError):
            latent_correlation(np.ones((1, 4)))

    def test_entries_bounded(self):
        z = np.random.default_rng(9).standard_normal((100, 6))
        report = latent_correlation(z, channel_dim=3)
        assert report.matrix.min() >= 0.0
        assert report.matrix.max() <= 1.0 + 1e-12
        assert np.allclose(report.matrix, report.matrix.T)


def test_mean_stderr():
    mean, err = mean_stderr([1.0, 2.0, 3.0])
    assert abs(mean - 2.0) < 1e-12
    assert abs(err - np.std([1, 2, 3], ddof=1) / np.sqrt(3)) < 1e-12
    assert mean_stderr([5.0]) == (5.0, 0.0)
    with pytest.raises(ValueError):
        mean_stderr([])
