"""Seeded synthetic benchmark whose tasks live at different label granularities.

Each image shows one shape (coarse factor) filled with one colour (mid
factor) and striped at one orientation (fine factor) on a dark background,
with random placement, size, stripe phase and pixel noise as nuisances. A
coarse task labels images by shape only, a mid task by (shape, colour) and a
fine task by (shape, colour, texture), so each task is best served by a
different granularity of features.

Pixel salience decreases from shape to colour to stripe orientation. Task t
draws local shape s as kind ``(s + t * shape_offset) mod num_shapes``, so
classes stay disjoint between the splits of a task while the unlabeled pool
(all training splits) covers the shapes every test split uses.
"""

from __future__ import annotations

import colorsys
import logging
import re

import numpy as np
import torch

from .folder import make_unlabeled_pool, split_classes
from .models import GranularityLevel, SyntheticSpec, TaskDataset, UnlabeledPool

logger = logging.getLogger(__name__)

_BACKGROUND = 0.15
_STRIPE_FREQUENCY = 3.0
_SATURATION = 0.5
_STRIPE_CONTRAST = 0.3
_CLASS_PATTERN = re.compile(r"shape(\d+)(?:_color(\d+))?(?:_texture(\d+))?$")


def class_name(shape: int, color: int | None = None, texture: int | None = None) -> str:
    """Class name of a factor prefix; names sort in generation order."""
    name = f"shape{shape:02d}"
    if color is not None:
        name += f"_color{color:02d}"
    if texture is not None:
        name += f"_texture{texture:02d}"
    return name


def class_factors(name: str) -> tuple[int, ...]:
    """Inverse of `class_name`: the factor indices a class fixes."""
    match = _CLASS_PATTERN.match(name)
    if match is None:
        raise ValueError(f"Not a synthetic class name: {name!r}")
    return tuple(int(group) for group in match.groups() if group is not None)


def _class_list(spec: SyntheticSpec, level: GranularityLevel) -> list[tuple[int, ...]]:
    shapes = range(spec.num_shapes)
    if level == "coarse":
        return [(s,) for s in shapes]
    colors = range(spec.colors_per_shape)
    if level == "mid":
        return [(s, c) for s in shapes for c in colors]
    return [(s, c, t) for s in shapes for c in colors for t in range(spec.textures_per_color)]


def _shape_mask(shape: int, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # shapes beyond the eight base kinds are horizontally stretched variants
    x = x / (1.0 + 0.5 * (shape // 8))
    kind = shape % 8
    if kind == 0:
        return x**2 + y**2 <= 1.0
    if kind == 1:
        return np.maximum(np.abs(x), np.abs(y)) <= 0.85
    if kind == 2:
        return (y <= 0.8) & (np.abs(x) <= 0.55 * (0.8 + y))
    if kind == 3:
        return ((np.abs(x) <= 0.3) & (np.abs(y) <= 1.0)) | (
            (np.abs(y) <= 0.3) & (np.abs(x) <= 1.0)
        )
    if kind == 4:
        r2 = x**2 + y**2
        return (r2 <= 1.0) & (r2 >= 0.3)
    if kind == 5:
        return np.abs(x) + np.abs(y) <= 1.0
    if kind == 6:
        return (np.abs(y) <= 0.35) & (np.abs(x) <= 1.0)
    return (np.abs(x) <= 0.35) & (np.abs(y) <= 1.0)


def render_image(
    spec: SyntheticSpec,
    shape: int,
    color: int,
    texture: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Render one (size, size, 3) float32 image in [0, 1]."""
    size = spec.image_size
    grid = (np.arange(size) + 0.5) / (size / 2.0) - 1.0
    v, u = np.meshgrid(grid, grid, indexing="ij")
    cx, cy = rng.uniform(-0.15, 0.15, size=2)
    scale = rng.uniform(0.55, 0.7)
    x, y = (u - cx) / scale, (v - cy) / scale

    mask = _shape_mask(shape, x, y)
    rgb = np.asarray(colorsys.hsv_to_rgb(color / spec.colors_per_shape, _SATURATION, 0.9))
    theta = np.pi * texture / spec.textures_per_color
    phase = rng.uniform(0.0, 2.0 * np.pi)
    stripes = 0.5 + 0.5 * np.sin(
        2.0 * np.pi * _STRIPE_FREQUENCY * (x * np.cos(theta) + y * np.sin(theta)) + phase
    )
    foreground = rgb[None, None, :] * (1.0 - _STRIPE_CONTRAST * stripes)[..., None]
    image = np.where(mask[..., None], foreground, _BACKGROUND)
    if spec.noise > 0:
        image = image + spec.noise * rng.standard_normal(image.shape)
    return np.clip(image, 0.0, 1.0).astype(np.float32)


def shape_kind(spec: SyntheticSpec, task_index: int, shape: int) -> int:
    """Rendered shape kind of a task's local shape index."""
    return (shape + task_index * spec.shape_offset) % spec.num_shapes


def _build_split(
    spec: SyntheticSpec,
    task_index: int,
    task: str,
    split: str,
    classes: list[tuple[int, ...]],
    rng: np.random.Generator,
) -> TaskDataset:
    images: list[np.ndarray] = []
    labels: list[int] = []
    ids: list[str] = []
    names = [class_name(*factors) for factors in classes]
    for label, (factors, name) in enumerate(zip(classes, names, strict=True)):
        for j in range(spec.images_per_class):
            shape = shape_kind(spec, task_index, factors[0])
            color = factors[1] if len(factors) > 1 else int(rng.integers(spec.colors_per_shape))
            texture = (
                factors[2] if len(factors) > 2 else int(rng.integers(spec.textures_per_color))
            )
            images.append(render_image(spec, shape, color, texture, rng))
            labels.append(label)
            ids.append(f"{task}/{name}/{j:04d}")
    return TaskDataset(
        name=task,
        split=split,  # type: ignore[arg-type]
        images=torch.from_numpy(np.stack(images)),
        labels=np.asarray(labels, dtype=np.int64),
        class_names=tuple(names),
        ids=tuple(ids),
    )


def generate_synthetic_benchmark(
    spec: SyntheticSpec,
) -> tuple[list[TaskDataset], UnlabeledPool]:
    """Generate every task of a synthetic benchmark plus its unlabeled pool.

    Parameters
    ----------
    spec : SyntheticSpec
        Factor counts, sizes, noise and seed

    Returns
    -------
    tuple[list[TaskDataset], UnlabeledPool]
        Train and test split of every task (in task order) and the pool built
        from all training splits

    Examples
    --------
    >>> datasets, pool = generate_synthetic_benchmark(SyntheticSpec())
    >>> [d.name for d in datasets[:2]]
    ['task0_coarse', 'task0_coarse']
    """
    datasets: list[TaskDataset] = []
    for index, level in enumerate(spec.levels):
        task = f"task{index}_{level}"
        rng = np.random.default_rng([spec.seed, index])
        classes = _class_list(spec, level)
        by_name = {class_name(*factors): factors for factors in classes}
        train, test = split_classes(by_name)
        datasets.append(_build_split(spec, index, task, "train", [by_name[n] for n in train], rng))
        datasets.append(_build_split(spec, index, task, "test", [by_name[n] for n in test], rng))
        logger.info(
            f"Generated {task}: {len(classes)} classes x {spec.images_per_class} images"
        )
    pool = make_unlabeled_pool(d for d in datasets if d.split == "train")
    return datasets, pool
