"""Tests for fusion checkpoints."""

from __future__ import annotations

import pytest
import torch

from grappa.checkpoint import parameters_sha256
from grappa.errors import ConfigError
from grappa.fusion import FusionConfig, GrappaModel, load_fusion, save_fusion, train_fusion


@pytest.fixture
def trained(tiny_backbone, tiny_pool, random_sets):
    config = FusionConfig(epochs=1, batch_size=6, projector_dim=8)
    return train_fusion(GrappaModel(tiny_backbone, random_sets), tiny_pool, "tc", config)


class TestFusionStorage:
    """Test save_fusion / load_fusion."""

    def test_round_trip(self, tmp_path, trained, tiny_backbone, tiny_images, random_sets):
        path = save_fusion(tmp_path / "fusion_tc.json", trained)

        loaded = load_fusion(path, tiny_backbone, random_sets)

        assert loaded.provenance == trained.provenance
        assert parameters_sha256(loaded.fusion_layers) == parameters_sha256(trained.fusion_layers)
        torch.testing.assert_close(loaded(tiny_images), trained(tiny_images))

    def test_needs_adaptor_sets(self, tmp_path, trained, tiny_backbone):
        path = save_fusion(tmp_path / "f.json", trained)

        with pytest.raises(ConfigError):
            load_fusion(path, tiny_backbone)

    def test_granularities_must_match(self, tmp_path, trained, tiny_backbone, random_sets):
        path = save_fusion(tmp_path / "f.json", trained)

        with pytest.raises(ConfigError, match="do not match"):
            load_fusion(path, tiny_backbone, random_sets[:2])

    def test_finetuned_adaptors_stored(self, tmp_path, tiny_backbone, tiny_images, random_sets):
        model = GrappaModel(tiny_backbone, random_sets)
        path = save_fusion(tmp_path / "f.json", model, finetuned_adaptors=True)

        loaded = load_fusion(path, tiny_backbone)

        assert parameters_sha256(loaded.adaptor_sets) == parameters_sha256(model.adaptor_sets)
        torch.testing.assert_close(loaded(tiny_images), model(tiny_images))

    def test_avg_model(self, tmp_path, tiny_backbone, tiny_images, random_sets):
        model = GrappaModel(tiny_backbone, random_sets, fusion="avg")
        path = save_fusion(tmp_path / "f.json", model)

        loaded = load_fusion(path, tiny_backbone, random_sets)

        assert loaded.fusion == "avg"
        torch.testing.assert_close(loaded(tiny_images), model(tiny_images))
