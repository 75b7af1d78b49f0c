"""Dataset data models."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
import torch
from pydantic import BaseModel, Field, model_validator

from ..errors import ConfigError, ShapeMismatchError

Split = Literal["train", "test"]
GranularityLevel = Literal["coarse", "mid", "fine"]


@dataclass(frozen=True)
class TaskDataset:
    """One split of one retrieval task.

    Attributes
    ----------
    name : str
        Task name (e.g. ``"flowers"`` or ``"synthetic_fine"``)
    split : Split
        ``"train"`` or ``"test"``
    images : torch.Tensor
        Channels-last pixels in [0, 1], shape (n, H, W, C), float32
    labels : np.ndarray
        Class index of every image into ``class_names``, int64
    class_names : tuple[str, ...]
        Names of the classes present in this split, sorted
    ids : tuple[str, ...]
        Stable image ids, unique across all tasks
    """

    name: str
    split: Split
    images: torch.Tensor
    labels: np.ndarray
    class_names: tuple[str, ...]
    ids: tuple[str, ...]

    def __post_init__(self) -> None:
        n = self.images.shape[0]
        if self.images.ndim != 4:
            raise ShapeMismatchError("images", expected="(n, H, W, C)", actual=tuple(self.images.shape))
        if self.labels.shape != (n,) or len(self.ids) != n:
            raise ShapeMismatchError(
                "labels/ids", expected=n, actual=(self.labels.shape, len(self.ids))
            )
        if n and (self.labels.min() < 0 or self.labels.max() >= len(self.class_names)):
            raise ConfigError(f"Task {self.name} has labels outside its class list")

    def __len__(self) -> int:
        return int(self.images.shape[0])

    @property
    def num_classes(self) -> int:
        return len(self.class_names)


@dataclass(frozen=True)
class UnlabeledPool:
    """Union of the training splits with class and task labels removed.

    Only pixels and opaque image ids survive; nothing downstream of
    `make_unlabeled_pool` can reach a label through this type.
    """

    images: torch.Tensor
    ids: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.ids) != self.images.shape[0]:
            raise ShapeMismatchError("ids", expected=self.images.shape[0], actual=len(self.ids))
        if len(set(self.ids)) != len(self.ids):
            raise ConfigError("UnlabeledPool ids contain duplicates")

    def __len__(self) -> int:
        return int(self.images.shape[0])


class SyntheticSpec(BaseModel):
    """Synthetic multi-granularity benchmark.

    Every image is drawn from a (shape, color, texture) factor triple. The
    colour classes of a shape and the texture classes of a colour are nested,
    so coarse classes are unions of mid classes, which are unions of fine
    classes.
    """

    levels: list[GranularityLevel] = Field(
        default_factory=lambda: ["coarse", "mid", "fine"],
        min_length=1,
        description="Granularity level of every task, one task per entry",
    )
    num_shapes: int = Field(default=4, ge=1, description="Coarse classes (shapes)")
    colors_per_shape: int = Field(default=2, ge=1, description="Mid classes per shape")
    textures_per_color: int = Field(default=2, ge=1, description="Fine classes per colour")
    shape_offset: int = Field(
        default=1,
        ge=0,
        description="Shift of the rendered shape kind per task, so the pool spans every shape",
    )
    images_per_class: int = Field(default=40, ge=1, description="Images per task class")
    image_size: int = Field(default=32, ge=8, description="Square image side in pixels")
    noise: float = Field(default=0.05, ge=0.0, description="Gaussian pixel noise sigma")
    seed: int = Field(default=0, description="Generator seed")

    @model_validator(mode="after")
    def validate_classes(self) -> SyntheticSpec:
        """Every task needs at least two classes so that both splits are non-empty."""
        for level in self.levels:
            if self.num_classes(level) < 2:
                raise ValueError(f"Task level {level!r} has fewer than 2 classes")
        return self

    @property
    def n_tasks(self) -> int:
        return len(self.levels)

    def num_classes(self, level: GranularityLevel) -> int:
        """Number of classes of a task at ``level``."""
        count = self.num_shapes
        if level in ("mid", "fine"):
            count *= self.colors_per_shape
        if level == "fine":
            count *= self.textures_per_color
        return count


class AugmentPolicy(BaseModel):
    """Random crop-resize, horizontal flip and brightness/contrast jitter."""

    crop_scale: tuple[float, float] = Field(
        default=(0.5, 1.0), description="Area fraction range of the random crop"
    )
    crop_ratio: tuple[float, float] = Field(
        default=(3.0 / 4.0, 4.0 / 3.0), description="Aspect-ratio range of the crop"
    )
    flip_probability: float = Field(default=0.5, ge=0.0, le=1.0)
    brightness: float = Field(default=0.2, ge=0.0, le=1.0, description="Jitter +/- fraction")
    contrast: float = Field(default=0.2, ge=0.0, le=1.0, description="Jitter +/- fraction")

    @model_validator(mode="after")
    def validate_ranges(self) -> AugmentPolicy:
        low, high = self.crop_scale
        if not 0.0 < low <= high <= 1.0:
            raise ValueError(f"crop_scale must satisfy 0 < low <= high <= 1, got {self.crop_scale}")
        if not 0.0 < self.crop_ratio[0] <= self.crop_ratio[1]:
            raise ValueError(f"crop_ratio must be an increasing positive range, got {self.crop_ratio}")
        return self

    @classmethod
    def identity(cls) -> AugmentPolicy:
        """Policy that leaves every image unchanged."""
        return cls(
            crop_scale=(1.0, 1.0),
            crop_ratio=(1.0, 1.0),
            flip_probability=0.0,
            brightness=0.0,
            contrast=0.0,
        )

    @property
    def is_identity(self) -> bool:
        return (
            self.crop_scale == (1.0, 1.0)
            and self.crop_ratio == (1.0, 1.0)
            and self.flip_probability == 0.0
            and self.brightness == 0.0
            and self.contrast == 0.0
        )


class TaskStatistics(BaseModel):
    """Per-task class and image counts of both splits."""

    task: str
    train_classes: int = 0
    train_images: int = 0
    test_classes: int = 0
    test_images: int = 0


class DatasetManifest(BaseModel):
    """Per-task statistics plus totals over all tasks."""

    tasks: list[TaskStatistics]
    total_train_images: int
    total_test_images: int
