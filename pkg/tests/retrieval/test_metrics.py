"""Tests for ranking and the retrieval metrics."""

from __future__ import annotations

import numpy as np
import pytest

from grappa.errors import ConfigError
from grappa.retrieval import (
    EvalTask,
    map_at_r,
    r_precision,
    rank_gallery,
    ranked_rows,
    score_task,
    top_matches,
    unit_rows,
)


def _brute_force(embeddings, labels):
    """Per-query (RP, MAP@R) by explicit sorting; None for R = 0."""
    n = len(labels)
    results = []
    for q in range(n):
        sims = []
        for j in range(n):
            if j == q:
                continue
            cos = float(embeddings[q] @ embeddings[j]) / (
                np.linalg.norm(embeddings[q]) * np.linalg.norm(embeddings[j])
            )
            sims.append((-cos, j))
        ranking = [j for _, j in sorted(sims)]
        r = sum(1 for j in range(n) if j != q and labels[j] == labels[q])
        if r == 0:
            results.append(None)
            continue
        rel = [labels[j] == labels[q] for j in ranking[:r]]
        rp = sum(rel) / r
        hits, total = 0, 0.0
        for i, is_rel in enumerate(rel, start=1):
            if is_rel:
                hits += 1
                total += hits / i
        results.append((rp, total / r))
    return results


class TestMetricFunctions:
    """Test r_precision and map_at_r on known rankings."""

    def test_r_precision(self):
        assert r_precision(np.array([True, False, True, False, True]), 4) == 0.5

    def test_map_at_r(self):
        assert map_at_r(np.array([True, False, True]), 2) == 0.5

    def test_late_hit_costs_more_under_map(self):
        relevant = np.array([False, True, True, False])

        assert r_precision(relevant, 2) == 0.5
        assert map_at_r(relevant, 2) == pytest.approx(0.25)

    def test_perfect_ranking(self):
        relevant = np.array([True, True, True, False])

        assert r_precision(relevant, 3) == 1.0
        assert map_at_r(relevant, 3) == 1.0

    def test_zero_r_is_undefined(self):
        assert r_precision(np.array([False]), 0) is None
        assert map_at_r(np.array([False]), 0) is None


class TestRanking:
    """Test gallery ranking."""

    def test_query_excluded_and_sorted(self):
        embeddings = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.1], [-1.0, 0.0]])

        assert rank_gallery(0, embeddings).tolist() == [2, 1, 3]

    def test_ties_by_ascending_id(self):
        embeddings = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 2.0], [0.0, -1.0]])

        assert rank_gallery(0, embeddings).tolist() == [1, 2, 3]

    def test_ranked_rows_match_rank_gallery(self, rng):
        embeddings = rng.standard_normal((20, 5))

        for query, order, sims in ranked_rows(embeddings):
            np.testing.assert_array_equal(order, rank_gallery(query, embeddings))
            assert np.all(np.diff(sims) <= 0)

    def test_too_few_embeddings(self):
        with pytest.raises(ConfigError):
            rank_gallery(0, np.ones((1, 3)))

    def test_top_matches(self):
        embeddings = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 0.0]])

        matches = top_matches(0, embeddings, k=1)

        assert matches == [(2, pytest.approx(1.0))]

    def test_unit_rows_keeps_zero_rows(self):
        unit = unit_rows(np.array([[3.0, 4.0], [0.0, 0.0]]))

        np.testing.assert_allclose(unit, [[0.6, 0.8], [0.0, 0.0]])


class TestScoreTask:
    """Test per-task scoring."""

    def test_matches_brute_force(self, rng):
        for _ in range(100):
            n = int(rng.integers(4, 20))
            embeddings = rng.standard_normal((n, 3))
            labels = rng.integers(0, 3, size=n)
            expected = [s for s in _brute_force(embeddings, labels) if s is not None]
            if not expected:
                continue

            report = score_task(EvalTask("t", embeddings, labels))

            assert report.num_queries == len(expected)
            assert report.excluded_queries == n - len(expected)
            assert report.rp == pytest.approx(np.mean([s[0] for s in expected]))
            assert report.map_at_r == pytest.approx(np.mean([s[1] for s in expected]))

    def test_map_never_exceeds_rp(self, rng):
        for _ in range(50):
            labels = rng.integers(0, 4, size=30)
            report = score_task(EvalTask("t", rng.standard_normal((30, 6)), labels))

            for query in report.queries:
                assert 0.0 <= query.map_at_r <= query.rp + 1e-12 <= 1.0 + 1e-12

    def test_invariant_to_rotation_and_scaling(self, rng):
        embeddings = rng.standard_normal((25, 4))
        labels = rng.integers(0, 3, size=25)
        rotation, _ = np.linalg.qr(rng.standard_normal((4, 4)))
        scales = rng.uniform(0.1, 10.0, size=(25, 1))

        base = score_task(EvalTask("t", embeddings, labels))
        moved = score_task(EvalTask("t", scales * (embeddings @ rotation), labels))

        assert moved.rp == pytest.approx(base.rp)
        assert moved.map_at_r == pytest.approx(base.map_at_r)

    def test_separated_classes_score_one(self):
        embeddings = np.array([[1.0, 0.0], [0.9, 0.1], [0.0, 1.0], [0.1, 0.9]])

        report = score_task(EvalTask("t", embeddings, np.array([0, 0, 1, 1])))

        assert (report.rp, report.map_at_r) == (1.0, 1.0)

    def test_singleton_class_excluded(self, rng):
        report = score_task(EvalTask("t", rng.standard_normal((3, 2)), np.array([0, 0, 1])))

        assert report.num_queries == 2
        assert report.excluded_queries == 1
        assert [q.query for q in report.queries] == ["0", "1"]

    def test_all_singletons_rejected(self, rng):
        with pytest.raises(ConfigError, match="no class"):
            score_task(EvalTask("t", rng.standard_normal((3, 2)), np.array([0, 1, 2])))

    def test_queries_dropped_on_request(self, rng):
        report = score_task(
            EvalTask("t", rng.standard_normal((6, 2)), np.array([0, 0, 1, 1, 2, 2])),
            keep_queries=False,
        )

        assert report.queries == []
        assert report.num_queries == 6
