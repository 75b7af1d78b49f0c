"""Multi-granularity pseudo-labels from k-means over frozen features."""

from __future__ import annotations

from .features import extract_feature_store
from .kmeans import assign, build_granularities, kmeans_fit, l2_normalize, nearest_centroids
from .models import FeatureStore, PseudoLabelSet
from .storage import load_pseudolabels, pseudolabel_path, save_pseudolabels

__all__ = [
    "FeatureStore",
    "PseudoLabelSet",
    "assign",
    "build_granularities",
    "extract_feature_store",
    "kmeans_fit",
    "l2_normalize",
    "load_pseudolabels",
    "nearest_centroids",
    "pseudolabel_path",
    "save_pseudolabels",
]
