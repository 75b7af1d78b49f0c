"""Pseudo-label data models."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ShapeMismatchError


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class FeatureStore:
    """Frozen-backbone features of the unlabeled training pool.

    Attributes
    ----------
    features : np.ndarray
        Matrix Z of shape (n_images, D)
    ids : tuple[str, ...]
        Image id of every row
    fingerprint : str
        Parameter hash of the model that produced the features
    """

    features: np.ndarray
    ids: tuple[str, ...]
    fingerprint: str = ""

    def __post_init__(self) -> None:
        if self.features.ndim != 2:
            raise ShapeMismatchError(
                "features", expected="(n_images, D)", actual=self.features.shape
            )
        if len(self.ids) != self.features.shape[0]:
            raise ShapeMismatchError(
                "ids", expected=self.features.shape[0], actual=len(self.ids)
            )
        if len(set(self.ids)) != len(self.ids):
            raise ConfigError("FeatureStore ids contain duplicates")
        if not np.isfinite(self.features).all():
            raise ConfigError("FeatureStore features contain NaN or Inf")
        object.__setattr__(self, "features", _readonly(self.features))

    def __len__(self) -> int:
        return int(self.features.shape[0])

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])


@dataclass(frozen=True)
class PseudoLabelSet:
    """Result of clustering the pool at one granularity.

    Attributes
    ----------
    index : int
        Granularity index i (0-based; larger index means more clusters)
    k : int
        Number of clusters
    centroids : np.ndarray
        Cluster centres of shape (k, D), float64
    assignments : np.ndarray
        Cluster id of every image, int64 in [0, k)
    inertia : float
        Sum of squared distances of points to their centroid
    seed : int
        Seed of the k-means++ initialisation
    fingerprint : str
        Fingerprint of the model whose features were clustered
    inertia_history : tuple[float, ...]
        Inertia after every Lloyd iteration (non-increasing)
    normalized : bool
        Whether features were L2-normalised before clustering
    """

    index: int
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    seed: int
    fingerprint: str = ""
    inertia_history: tuple[float, ...] = field(default_factory=tuple)
    normalized: bool = False

    def __post_init__(self) -> None:
        if self.centroids.shape[0] != self.k:
            raise ShapeMismatchError(
                "centroids", expected=(self.k, "D"), actual=self.centroids.shape
            )
        if self.assignments.size and (
            self.assignments.min() < 0 or self.assignments.max() >= self.k
        ):
            raise ConfigError(f"Assignments fall outside [0, {self.k})")
        object.__setattr__(self, "centroids", _readonly(self.centroids))
        object.__setattr__(self, "assignments", _readonly(self.assignments))

    @property
    def n_images(self) -> int:
        return int(self.assignments.shape[0])

    @property
    def mean_cluster_size(self) -> float:
        """Mean size of the non-empty clusters."""
        occupied = np.unique(self.assignments).size
        return self.n_images / occupied if occupied else 0.0

    @property
    def name(self) -> str:
        """Stable identifier used for artifact file names."""
        return f"g{self.index}_k{self.k}"
