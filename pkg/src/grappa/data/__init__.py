"""Task datasets, the unlabeled training pool and the synthetic benchmark."""

from __future__ import annotations

from .augment import augment, augment_batch, augment_with
from .folder import (
    dataset_manifest,
    load_image_folder,
    make_unlabeled_pool,
    select_split,
    split_classes,
)
from .models import (
    AugmentPolicy,
    DatasetManifest,
    SyntheticSpec,
    TaskDataset,
    TaskStatistics,
    UnlabeledPool,
)
from .synthetic import class_factors, class_name, generate_synthetic_benchmark, shape_kind

__all__ = [
    "AugmentPolicy",
    "DatasetManifest",
    "SyntheticSpec",
    "TaskDataset",
    "TaskStatistics",
    "UnlabeledPool",
    "augment",
    "augment_batch",
    "augment_with",
    "class_factors",
    "class_name",
    "dataset_manifest",
    "generate_synthetic_benchmark",
    "load_image_folder",
    "make_unlabeled_pool",
    "select_split",
    "shape_kind",
    "split_classes",
]
