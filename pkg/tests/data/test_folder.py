"""Tests for image-folder ingestion and the unlabeled pool."""

from __future__ import annotations

import numpy as np
import pytest
import torch
from PIL import Image

from grappa.data import (
    TaskDataset,
    load_image_folder,
    make_unlabeled_pool,
    split_classes,
)
from grappa.errors import ConfigError


def _write_task(root, task, classes, per_class=2, size=20):
    for c, name in enumerate(classes):
        class_dir = root / task / name
        class_dir.mkdir(parents=True)
        for j in range(per_class):
            pixels = np.full((size, size, 3), 40 * c + j, dtype=np.uint8)
            Image.fromarray(pixels).save(class_dir / f"img{j}.png")


class TestSplitClasses:
    """Test the alphabetical class split."""

    def test_even(self):
        assert split_classes(["d", "c", "b", "a"]) == (["a", "b"], ["c", "d"])

    def test_odd_gives_test_the_extra_class(self):
        assert split_classes(["a", "b", "c", "d", "e"]) == (["a", "b"], ["c", "d", "e"])


class TestLoadImageFolder:
    """Test loading root/<task>/<class>/<image> trees."""

    def test_loads_and_splits(self, tmp_path):
        _write_task(tmp_path, "birds", ["d", "a", "c", "b"])

        train, test = load_image_folder(tmp_path, height=16, width=16)

        assert (train.name, train.split, test.split) == ("birds", "train", "test")
        assert train.class_names == ("a", "b")
        assert test.class_names == ("c", "d")
        assert train.images.shape == (4, 16, 16, 3)
        assert train.labels.tolist() == [0, 0, 1, 1]
        assert train.ids[0] == "birds/a/img0.png"

    def test_pixels_scaled_to_unit_range(self, tmp_path):
        _write_task(tmp_path, "t", ["a", "b"], per_class=1)

        train, _ = load_image_folder(tmp_path, height=8, width=8)

        assert torch.allclose(train.images, torch.zeros_like(train.images))

    def test_tasks_sorted(self, tmp_path):
        _write_task(tmp_path, "zeta", ["a", "b"], per_class=1)
        _write_task(tmp_path, "alpha", ["a", "b"], per_class=1)

        datasets = load_image_folder(tmp_path, height=8, width=8)

        assert [d.name for d in datasets] == ["alpha", "alpha", "zeta", "zeta"]

    def test_empty_class_dir_rejected(self, tmp_path):
        _write_task(tmp_path, "t", ["a", "b"], per_class=1)
        (tmp_path / "t" / "c").mkdir()

        with pytest.raises(ConfigError, match="no images"):
            load_image_folder(tmp_path, height=8, width=8)

    def test_single_class_task_rejected(self, tmp_path):
        _write_task(tmp_path, "t", ["a"], per_class=1)

        with pytest.raises(ConfigError, match="at least two classes"):
            load_image_folder(tmp_path, height=8, width=8)

    def test_missing_root(self, tmp_path):
        with pytest.raises(ConfigError):
            load_image_folder(tmp_path / "nope")

    def test_root_without_tasks(self, tmp_path):
        with pytest.raises(ConfigError, match="No task"):
            load_image_folder(tmp_path)


class TestUnlabeledPool:
    """Test make_unlabeled_pool."""

    def _dataset(self, name, split, ids):
        return TaskDataset(
            name=name,
            split=split,
            images=torch.rand(len(ids), 4, 4, 3),
            labels=np.zeros(len(ids), dtype=np.int64),
            class_names=("a",),
            ids=tuple(ids),
        )

    def test_order_independent(self):
        first = self._dataset("x", "train", ["x/a/2", "x/a/1"])
        second = self._dataset("y", "train", ["y/a/1"])

        pool = make_unlabeled_pool([second, first])
        again = make_unlabeled_pool([first, second])

        assert pool.ids == ("x/a/1", "x/a/2", "y/a/1")
        assert torch.equal(pool.images, again.images)

    def test_test_split_rejected(self):
        with pytest.raises(ConfigError, match="cannot enter"):
            make_unlabeled_pool([self._dataset("x", "test", ["x/a/1"])])

    def test_empty_rejected(self):
        with pytest.raises(ConfigError):
            make_unlabeled_pool([])

    def test_duplicate_ids_rejected(self):
        dataset = self._dataset("x", "train", ["x/a/1"])

        with pytest.raises(ConfigError, match="duplicates"):
            make_unlabeled_pool([dataset, dataset])
