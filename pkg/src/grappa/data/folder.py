"""Image-folder ingestion (``root/<task>/<class>/<image>``) and split handling."""

from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torchvision import transforms

from ..errors import ConfigError
from .models import DatasetManifest, TaskDataset, TaskStatistics, UnlabeledPool

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = frozenset({".jpg", ".jpeg", ".png", ".bmp", ".gif", ".webp"})


def split_classes(class_names: Iterable[str]) -> tuple[list[str], list[str]]:
    """Alphabetical class split: the first ``floor(n / 2)`` classes train, the rest test.

    Examples
    --------
    >>> split_classes(["d", "b", "a", "c", "e"])
    (['a', 'b'], ['c', 'd', 'e'])
    """
    ordered = sorted(class_names)
    half = len(ordered) // 2
    return ordered[:half], ordered[half:]


def _preprocess(height: int, width: int) -> transforms.Compose:
    return transforms.Compose(
        [
            transforms.Resize(max(height, width)),
            transforms.CenterCrop((height, width)),
            transforms.ToTensor(),
        ]
    )


def _load_image(path: Path, pipeline: transforms.Compose) -> torch.Tensor:
    with Image.open(path) as image:
        chw = pipeline(image.convert("RGB"))
    return chw.permute(1, 2, 0).contiguous()


def _build_split(
    task: str,
    split: str,
    classes: Sequence[str],
    files: dict[str, list[Path]],
    pipeline: transforms.Compose,
) -> TaskDataset:
    images: list[torch.Tensor] = []
    labels: list[int] = []
    ids: list[str] = []
    for label, name in enumerate(classes):
        for path in files[name]:
            images.append(_load_image(path, pipeline))
            labels.append(label)
            ids.append(f"{task}/{name}/{path.name}")
    return TaskDataset(
        name=task,
        split=split,  # type: ignore[arg-type]
        images=torch.stack(images),
        labels=np.asarray(labels, dtype=np.int64),
        class_names=tuple(classes),
        ids=tuple(ids),
    )


def load_image_folder(root: Path, height: int = 32, width: int = 32) -> list[TaskDataset]:
    """Load every task under ``root`` and split its classes into train and test.

    Parameters
    ----------
    root : Path
        Directory of task directories, each holding class directories of images
    height, width : int
        Output size; images are resized (shorter side) and center-cropped

    Returns
    -------
    list[TaskDataset]
        Train and test split of every task, tasks in alphabetical order

    Raises
    ------
    ConfigError
        If the root has no task, a class directory holds no image, or a task
        has fewer than two classes
    """
    if not root.is_dir():
        raise ConfigError(f"Dataset root {root} is not a directory", {"root": str(root)})
    pipeline = _preprocess(height, width)
    datasets: list[TaskDataset] = []
    for task_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        files: dict[str, list[Path]] = {}
        for class_dir in sorted(p for p in task_dir.iterdir() if p.is_dir()):
            images = sorted(
                p for p in class_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
            )
            if not images:
                raise ConfigError(
                    f"Class directory {class_dir} contains no images",
                    {"class_dir": str(class_dir)},
                )
            files[class_dir.name] = images
        if len(files) < 2:
            raise ConfigError(
                f"Task {task_dir.name} needs at least two classes, found {len(files)}",
                {"task": task_dir.name},
            )
        train, test = split_classes(files)
        datasets.append(_build_split(task_dir.name, "train", train, files, pipeline))
        datasets.append(_build_split(task_dir.name, "test", test, files, pipeline))
        logger.info(
            f"Loaded task {task_dir.name}: {len(train)} train / {len(test)} test classes"
        )
    if not datasets:
        raise ConfigError(f"No task directories found under {root}", {"root": str(root)})
    return datasets


def make_unlabeled_pool(datasets: Iterable[TaskDataset]) -> UnlabeledPool:
    """Merge training splits into one pool without class or task labels.

    Images are ordered by id, so the pool does not depend on input order.

    Raises
    ------
    ConfigError
        If a test split is passed or no dataset is given
    """
    rows: list[tuple[str, torch.Tensor]] = []
    for dataset in datasets:
        if dataset.split != "train":
            raise ConfigError(
                f"Test split of task {dataset.name} cannot enter the training pool",
                {"task": dataset.name},
            )
        rows.extend(zip(dataset.ids, dataset.images, strict=True))
    if not rows:
        raise ConfigError("Cannot build an unlabeled pool from no training images")
    rows.sort(key=lambda row: row[0])
    return UnlabeledPool(
        images=torch.stack([image for _, image in rows]),
        ids=tuple(image_id for image_id, _ in rows),
    )


def dataset_manifest(datasets: Iterable[TaskDataset]) -> DatasetManifest:
    """Per-task class/image counts of both splits, plus totals."""
    stats: dict[str, TaskStatistics] = {}
    for dataset in datasets:
        entry = stats.setdefault(dataset.name, TaskStatistics(task=dataset.name))
        if dataset.split == "train":
            entry.train_classes += dataset.num_classes
            entry.train_images += len(dataset)
        else:
            entry.test_classes += dataset.num_classes
            entry.test_images += len(dataset)
    tasks = [stats[name] for name in sorted(stats)]
    return DatasetManifest(
        tasks=tasks,
        total_train_images=sum(t.train_images for t in tasks),
        total_test_images=sum(t.test_images for t in tasks),
    )


def select_split(datasets: Iterable[TaskDataset], split: str) -> list[TaskDataset]:
    """Datasets of one split, in input order."""
    return [d for d in datasets if d.split == split]
