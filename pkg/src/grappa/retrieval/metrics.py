"""Leave-one-out ranking and the R-Precision / MAP@R metrics."""

from __future__ import annotations

from collections.abc import Iterator

import numpy as np

from ..errors import ConfigError

# Query rows ranked per block
_RANK_BLOCK = 256


def unit_rows(embeddings: np.ndarray) -> np.ndarray:
    """Row-normalised float64 copy; zero rows stay zero."""
    points = np.asarray(embeddings, dtype=np.float64)
    norms = np.linalg.norm(points, axis=1, keepdims=True)
    return points / np.where(norms > 0, norms, 1.0)


def rank_gallery(query_id: int, embeddings: np.ndarray) -> np.ndarray:
    """All ids except the query, by descending cosine similarity.

    Ties are ordered by ascending id.

    Raises
    ------
    ConfigError
        If fewer than two embeddings are given
    """
    n = embeddings.shape[0]
    if n < 2:
        raise ConfigError("Ranking needs at least two embeddings")
    unit = unit_rows(embeddings)
    similarity = unit @ unit[query_id]
    similarity[query_id] = -np.inf
    order = np.argsort(-similarity, kind="stable")
    return order[:-1]


def ranked_rows(embeddings: np.ndarray) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
    """Yield ``(query, ranking, similarities)`` for every query, in blocks."""
    unit = unit_rows(embeddings)
    n = unit.shape[0]
    for start in range(0, n, _RANK_BLOCK):
        stop = min(start + _RANK_BLOCK, n)
        block = unit[start:stop] @ unit.T
        block[np.arange(stop - start), np.arange(start, stop)] = -np.inf
        orders = np.argsort(-block, axis=1, kind="stable")[:, :-1]
        for offset, order in enumerate(orders):
            yield start + offset, order, block[offset, order]


def r_precision(relevant: np.ndarray, r: int) -> float | None:
    """Fraction of relevant items among the top ``r``; None when ``r`` is 0.

    Parameters
    ----------
    relevant : np.ndarray
        Relevance flags of the ranked gallery
    r : int
        Number of relevant gallery items

    Examples
    --------
    >>> r_precision(np.array([True, False, True, False, True]), 4)
    0.5
    """
    if r <= 0:
        return None
    return float(np.count_nonzero(relevant[:r])) / r


def map_at_r(relevant: np.ndarray, r: int) -> float | None:
    """``(1 / r) * sum_{i <= r} rel(i) * P(i)``; None when ``r`` is 0.

    Examples
    --------
    >>> map_at_r(np.array([True, False, True]), 2)
    0.5
    """
    if r <= 0:
        return None
    hits = np.asarray(relevant[:r], dtype=bool)
    precision = np.cumsum(hits) / np.arange(1, hits.size + 1)
    return float(precision[hits].sum()) / r


def top_matches(query_id: int, embeddings: np.ndarray, k: int = 5) -> list[tuple[int, float]]:
    """The ``k`` best gallery ids with their cosine similarity."""
    ranking = rank_gallery(query_id, embeddings)[:k]
    unit = unit_rows(embeddings)
    similarity = unit[ranking] @ unit[query_id]
    return [(int(i), float(s)) for i, s in zip(ranking, similarity, strict=True)]
