"""Lloyd k-means with k-means++ seeding.

Distances are exact squared Euclidean distances in float64 (no
``|a|^2 - 2ab + |b|^2`` expansion), so equidistant points resolve to the
lowest centroid index deterministically.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np
from sklearn.cluster import kmeans_plusplus

from ..errors import ConfigError, InvariantViolationError, ShapeMismatchError
from ..settings import INERTIA_RELATIVE_SLACK, get_settings
from .models import PseudoLabelSet

logger = logging.getLogger(__name__)

# Upper bound on elements of one (chunk, k, D) difference tensor
_DISTANCE_BLOCK = 1 << 22


def _as_float64(features: np.ndarray, name: str = "features") -> np.ndarray:
    array = np.asarray(features, dtype=np.float64)
    if array.ndim != 2:
        raise ShapeMismatchError(name, expected="(n, D)", actual=array.shape)
    if not np.isfinite(array).all():
        raise ConfigError(f"{name} contain NaN or Inf")
    return array


def l2_normalize(features: np.ndarray) -> np.ndarray:
    """Row-wise L2 normalisation; zero rows are rejected."""
    norms = np.linalg.norm(features, axis=1, keepdims=True)
    if (norms == 0).any():
        raise ConfigError("Cannot L2-normalise a zero feature vector")
    return features / norms


def nearest_centroids(
    features: np.ndarray, centroids: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Nearest centroid and its squared distance for every row.

    Parameters
    ----------
    features : np.ndarray
        Points of shape (n, D), float64
    centroids : np.ndarray
        Centres of shape (k, D), float64

    Returns
    -------
    tuple[np.ndarray, np.ndarray]
        ``(labels, squared_distances)``; ties go to the lowest index
    """
    n, dim = features.shape
    k = centroids.shape[0]
    chunk = max(1, _DISTANCE_BLOCK // max(1, k * dim))
    labels = np.empty(n, dtype=np.int64)
    distances = np.empty(n, dtype=np.float64)
    for start in range(0, n, chunk):
        block = features[start : start + chunk]
        diff = block[:, None, :] - centroids[None, :, :]
        sq = np.einsum("nkd,nkd->nk", diff, diff)
        # argmin returns the first minimum
        best = sq.argmin(axis=1)
        labels[start : start + chunk] = best
        distances[start : start + chunk] = sq[np.arange(block.shape[0]), best]
    return labels, distances


def assign(features: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Label every point with the index of its nearest centroid.

    Raises
    ------
    ShapeMismatchError
        If centroid and feature dimensions differ
    """
    points = _as_float64(features)
    centres = _as_float64(centroids, "centroids")
    if points.shape[1] != centres.shape[1]:
        raise ShapeMismatchError(
            "centroids", expected=("k", points.shape[1]), actual=centres.shape
        )
    labels, _ = nearest_centroids(points, centres)
    return labels


def _update_centroids(
    features: np.ndarray,
    labels: np.ndarray,
    distances: np.ndarray,
    previous: np.ndarray,
) -> np.ndarray:
    """Cluster means; empty clusters move to the points farthest from their centroid."""
    k, dim = previous.shape
    counts = np.bincount(labels, minlength=k)
    sums = np.zeros((k, dim), dtype=np.float64)
    np.add.at(sums, labels, features)
    centroids = previous.copy()
    occupied = counts > 0
    centroids[occupied] = sums[occupied] / counts[occupied, None]

    empty = np.flatnonzero(~occupied)
    if empty.size:
        farthest = np.argsort(-distances, kind="stable")[: empty.size]
        centroids[empty] = features[farthest]
        logger.debug(f"Re-seeded {empty.size} empty cluster(s)")
    return centroids


def kmeans_fit(
    features: np.ndarray,
    k: int,
    seed: int,
    max_iters: int = 100,
    tol: float = 1e-4,
    normalize: bool = False,
    index: int = 0,
    fingerprint: str = "",
) -> PseudoLabelSet:
    """Cluster features with Lloyd iterations from k-means++ seeds.

    Parameters
    ----------
    features : np.ndarray
        Matrix Z of shape (n_images, D)
    k : int
        Number of clusters, 1 <= k <= n_images
    seed : int
        Seed of the k-means++ initialisation
    max_iters : int, optional
        Maximum Lloyd iterations (default: 100)
    tol : float, optional
        Stop once the largest centroid displacement drops below this
        (default: 1e-4)
    normalize : bool, optional
        L2-normalise rows before clustering (default: False)
    index : int, optional
        Granularity index stored in the result (default: 0)
    fingerprint : str, optional
        Fingerprint of the feature-producing model (default: "")

    Returns
    -------
    PseudoLabelSet
        Centroids and assignments; ``assign(Z, centroids)`` reproduces the
        stored assignments exactly

    Raises
    ------
    ConfigError
        If k is not in [1, n_images] or features are not finite
    InvariantViolationError
        If an iteration increases inertia (with ``check_invariants`` on)

    Examples
    --------
    >>> labels = kmeans_fit(np.random.rand(100, 8), k=4, seed=0)
    >>> labels.assignments.shape
    (100,)
    """
    points = _as_float64(features)
    n = points.shape[0]
    if k <= 0:
        raise ConfigError(f"k must be positive, got {k}", {"k": k})
    if k > n:
        raise ConfigError(
            f"k={k} exceeds the number of images ({n})", {"k": k, "n_images": n}
        )
    if normalize:
        points = l2_normalize(points)

    check = get_settings().check_invariants
    centroids, _ = kmeans_plusplus(points, n_clusters=k, random_state=seed)
    centroids = np.asarray(centroids, dtype=np.float64)
    labels, distances = nearest_centroids(points, centroids)
    inertia = float(distances.sum())
    history = [inertia]
    # absolute floor so rounding at inertia ~ 0 does not trip the check
    floor = INERTIA_RELATIVE_SLACK * float(np.einsum("nd,nd->", points, points) + 1.0)

    for iteration in range(1, max_iters + 1):
        updated = _update_centroids(points, labels, distances, centroids)
        shift = float(np.linalg.norm(updated - centroids, axis=1).max())
        centroids = updated
        labels, distances = nearest_centroids(points, centroids)
        new_inertia = float(distances.sum())
        if check and new_inertia > inertia * (1.0 + INERTIA_RELATIVE_SLACK) + floor:
            raise InvariantViolationError(
                "Lloyd monotonicity",
                f"inertia rose from {inertia:.6g} to {new_inertia:.6g} "
                f"at iteration {iteration}",
            )
        inertia = new_inertia
        history.append(inertia)
        logger.debug(
            f"k-means k={k} iteration {iteration}: inertia={inertia:.6g} shift={shift:.3g}"
        )
        if shift < tol:
            break

    logger.info(
        f"k-means k={k} finished after {len(history) - 1} iteration(s), "
        f"inertia={inertia:.6g}"
    )
    return PseudoLabelSet(
        index=index,
        k=k,
        centroids=centroids,
        assignments=labels,
        inertia=inertia,
        seed=seed,
        fingerprint=fingerprint,
        inertia_history=tuple(history),
        normalized=normalize,
    )


def build_granularities(
    features: np.ndarray,
    k_list: Sequence[int],
    seed: int,
    max_iters: int = 100,
    tol: float = 1e-4,
    normalize: bool = False,
    fingerprint: str = "",
) -> list[PseudoLabelSet]:
    """One independent k-means run per entry of a strictly increasing k list.

    Granularity ``i`` is seeded with ``seed + i``, so a single-entry list
    reproduces ``kmeans_fit(features, k, seed)``.

    Raises
    ------
    ConfigError
        If the list is empty or not strictly increasing
    """
    ks = list(k_list)
    if not ks:
        raise ConfigError("k list must not be empty")
    if any(b <= a for a, b in zip(ks, ks[1:], strict=False)):
        raise ConfigError(f"k list must be strictly increasing, got {ks}", {"k_list": ks})
    return [
        kmeans_fit(
            features,
            k,
            seed + index,
            max_iters=max_iters,
            tol=tol,
            normalize=normalize,
            index=index,
            fingerprint=fingerprint,
        )
        for index, k in enumerate(ks)
    ]
