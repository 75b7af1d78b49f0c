"""Tests for k-means pseudo-labels."""

from __future__ import annotations

import numpy as np
import pytest
from sklearn.cluster import kmeans_plusplus

from grappa.errors import ConfigError, ShapeMismatchError
from grappa.pseudolabels import (
    FeatureStore,
    assign,
    build_granularities,
    extract_feature_store,
    kmeans_fit,
    l2_normalize,
    nearest_centroids,
)


def _blobs(rng, centers, per_cluster, spread=0.05):
    centers = np.asarray(centers, dtype=np.float64)
    points = [c + spread * rng.standard_normal((per_cluster, centers.shape[1])) for c in centers]
    return np.concatenate(points)


class TestNearestCentroids:
    """Test exact nearest-centroid assignment."""

    def test_matches_brute_force(self, rng):
        for _ in range(20):
            features = rng.standard_normal((40, 5))
            centroids = rng.standard_normal((7, 5))

            labels = assign(features, centroids)

            brute = np.array(
                [min(range(7), key=lambda j: float(((x - centroids[j]) ** 2).sum())) for x in features]
            )
            np.testing.assert_array_equal(labels, brute)

    def test_ties_go_to_lowest_index(self):
        features = np.array([[0.0, 0.0]])
        centroids = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])

        labels, distances = nearest_centroids(features, centroids)

        assert labels.tolist() == [0]
        assert distances.tolist() == [1.0]

    def test_dimension_mismatch(self, rng):
        with pytest.raises(ShapeMismatchError):
            assign(rng.standard_normal((4, 3)), rng.standard_normal((2, 4)))


class TestKMeansFit:
    """Test Lloyd k-means."""

    def test_separated_blobs_recovered(self, rng):
        features = _blobs(rng, [[0, 0], [5, 5], [0, 5]], per_cluster=20)

        result = kmeans_fit(features, k=3, seed=0)

        groups = [set(result.assignments[i * 20 : (i + 1) * 20]) for i in range(3)]
        assert all(len(g) == 1 for g in groups)
        assert len(set.union(*groups)) == 3

    def test_assign_reproduces_assignments(self, rng):
        features = rng.standard_normal((60, 4))

        result = kmeans_fit(features, k=5, seed=1)

        np.testing.assert_array_equal(assign(features, result.centroids), result.assignments)

    def test_inertia_non_increasing(self):
        for seed in range(50):
            features = np.random.default_rng(seed).standard_normal((50, 3))

            history = kmeans_fit(features, k=6, seed=seed, tol=0.0).inertia_history

            assert all(b <= a * (1 + 1e-9) + 1e-9 for a, b in zip(history, history[1:], strict=False))

    def test_tol_bounds_largest_centroid_shift(self, rng):
        features = rng.standard_normal((40, 3))
        start, _ = kmeans_plusplus(features, n_clusters=4, random_state=0)
        first = kmeans_fit(features, k=4, seed=0, max_iters=1, tol=0.0)
        shift = float(np.linalg.norm(first.centroids - start, axis=1).max())

        above = kmeans_fit(features, k=4, seed=0, tol=shift * 1.0001)
        below = kmeans_fit(features, k=4, seed=0, tol=shift * 0.9999)

        assert len(above.inertia_history) == 2
        assert len(below.inertia_history) > 2

    def test_k_equals_n_gives_zero_inertia(self, rng):
        features = rng.standard_normal((12, 3))

        result = kmeans_fit(features, k=12, seed=0)

        assert result.inertia == pytest.approx(0.0, abs=1e-12)
        assert len(set(result.assignments.tolist())) == 12

    def test_same_seed_is_deterministic(self, rng):
        features = rng.standard_normal((80, 6))

        first = kmeans_fit(features, k=8, seed=3)
        second = kmeans_fit(features, k=8, seed=3)

        np.testing.assert_array_equal(first.centroids, second.centroids)
        np.testing.assert_array_equal(first.assignments, second.assignments)

    def test_inertia_is_sum_of_squared_distances(self, rng):
        features = rng.standard_normal((30, 2))

        result = kmeans_fit(features, k=4, seed=0)

        expected = sum(
            float(((x - result.centroids[label]) ** 2).sum())
            for x, label in zip(features, result.assignments, strict=True)
        )
        assert result.inertia == pytest.approx(expected)

    def test_normalized_features(self, rng):
        features = rng.standard_normal((30, 4)) * 10

        result = kmeans_fit(features, k=3, seed=0, normalize=True)

        assert result.normalized
        np.testing.assert_array_equal(
            assign(l2_normalize(features), result.centroids), result.assignments
        )

    def test_results_are_read_only(self, rng):
        result = kmeans_fit(rng.standard_normal((10, 2)), k=2, seed=0)

        with pytest.raises(ValueError):
            result.assignments[0] = 1

    @pytest.mark.parametrize("k", [0, -1, 11])
    def test_invalid_k(self, rng, k):
        with pytest.raises(ConfigError):
            kmeans_fit(rng.standard_normal((10, 2)), k=k, seed=0)

    def test_non_finite_features(self):
        features = np.ones((5, 2))
        features[2, 1] = np.nan

        with pytest.raises(ConfigError):
            kmeans_fit(features, k=2, seed=0)

    def test_name(self, rng):
        result = kmeans_fit(rng.standard_normal((10, 2)), k=3, seed=0, index=2)

        assert result.name == "g2_k3"
        assert result.n_images == 10


class TestBuildGranularities:
    """Test multi-granularity clustering."""

    def test_one_set_per_k(self, rng):
        features = rng.standard_normal((64, 4))

        sets = build_granularities(features, [2, 4, 8], seed=5)

        assert [s.k for s in sets] == [2, 4, 8]
        assert [s.index for s in sets] == [0, 1, 2]
        assert [s.seed for s in sets] == [5, 6, 7]

    def test_single_entry_matches_kmeans_fit(self, rng):
        features = rng.standard_normal((40, 3))

        (only,) = build_granularities(features, [5], seed=2)
        direct = kmeans_fit(features, 5, seed=2)

        np.testing.assert_array_equal(only.assignments, direct.assignments)

    def test_mean_cluster_size_shrinks(self, rng):
        sets = build_granularities(rng.standard_normal((128, 4)), [2, 8, 32], seed=0)

        sizes = [s.mean_cluster_size for s in sets]
        assert sizes == sorted(sizes, reverse=True)

    @pytest.mark.parametrize("k_list", [[], [4, 4], [8, 2]])
    def test_invalid_k_list(self, rng, k_list):
        with pytest.raises(ConfigError):
            build_granularities(rng.standard_normal((20, 2)), k_list, seed=0)


class TestFeatureStore:
    """Test feature extraction over the pool."""

    def test_extract(self, tiny_backbone, tiny_pool):
        store = extract_feature_store(tiny_backbone, tiny_pool, batch_size=5)

        assert store.features.shape == (12, 16)
        assert store.features.dtype == np.float64
        assert store.ids == tiny_pool.ids
        assert len(store.fingerprint) == 64

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ConfigError):
            FeatureStore(features=np.zeros((2, 3)), ids=("a", "a"))

    def test_id_count_checked(self):
        with pytest.raises(ShapeMismatchError):
            FeatureStore(features=np.zeros((2, 3)), ids=("a",))
