"""Attention fusion of adaptor sets and its consistency training."""

from __future__ import annotations

from .lars import LARS
from .layers import (
    FusionLayer,
    avg_fuse_layer,
    combine,
    fuse_layer,
    fusion_attention,
    pool_tokens,
    stack_adaptor_outputs,
)
from .losses import Projector, barlow_twins_loss, cross_correlation
from .model import GrappaModel, check_attention
from .models import RANDOM_VARIANTS, FusionConfig, FusionProvenance, FusionVariant
from .neighbors import NeighborGraph, PairBatch, build_knn_graph, sample_pairs
from .storage import load_fusion, save_fusion
from .training import random_adaptor_sets, train_fusion, train_fusion_supervised

__all__ = [
    "LARS",
    "FusionConfig",
    "FusionLayer",
    "FusionProvenance",
    "FusionVariant",
    "GrappaModel",
    "NeighborGraph",
    "PairBatch",
    "RANDOM_VARIANTS",
    "Projector",
    "avg_fuse_layer",
    "barlow_twins_loss",
    "build_knn_graph",
    "check_attention",
    "combine",
    "cross_correlation",
    "fuse_layer",
    "fusion_attention",
    "load_fusion",
    "pool_tokens",
    "random_adaptor_sets",
    "sample_pairs",
    "save_fusion",
    "stack_adaptor_outputs",
    "train_fusion",
    "train_fusion_supervised",
]
