"""Tests for adaptor training and checkpoints."""

from __future__ import annotations

import warnings

import numpy as np
import pytest
import torch

from grappa.adaptors import (
    AdaptedViT,
    AdaptorConfig,
    adaptor_path,
    load_adaptor_set,
    save_adaptor_set,
    train_adaptor_set,
)
from grappa.checkpoint import parameters_sha256
from grappa.data import UnlabeledPool
from grappa.errors import ShapeMismatchError
from grappa.pseudolabels import build_granularities, extract_feature_store


@pytest.fixture
def pseudo_labels(tiny_backbone, tiny_pool):
    store = extract_feature_store(tiny_backbone, tiny_pool)
    return build_granularities(store.features, [2, 4], seed=0, fingerprint=store.fingerprint)


@pytest.fixture
def config():
    return AdaptorConfig(bottleneck_dim=4, epochs=2, batch_size=5, learning_rate=1e-2)


class TestTrainAdaptorSet:
    """Test training one adaptor set."""

    def test_backbone_unchanged(self, tiny_backbone, tiny_pool, pseudo_labels, config):
        before = parameters_sha256(tiny_backbone)

        train_adaptor_set(tiny_backbone, tiny_pool, pseudo_labels[1], config)

        assert parameters_sha256(tiny_backbone) == before

    def test_result_is_frozen_with_provenance(self, tiny_backbone, tiny_pool, pseudo_labels, config):
        adaptors = train_adaptor_set(tiny_backbone, tiny_pool, pseudo_labels[1], config)

        assert adaptors.granularity == 1
        assert adaptors.bottleneck_dim == 4
        assert not any(p.requires_grad for p in adaptors.parameters())
        provenance = adaptors.provenance
        assert provenance.num_clusters == 4
        assert provenance.feature_fingerprint == pseudo_labels[1].fingerprint
        assert provenance.backbone_fingerprint == parameters_sha256(tiny_backbone)
        assert provenance.seed == 1
        assert np.isfinite(provenance.final_loss)
        assert type(provenance.final_loss) is float
        assert 0.0 <= provenance.final_accuracy <= 1.0

    def test_adaptors_move_away_from_identity(
        self, tiny_backbone, tiny_pool, tiny_images, pseudo_labels, config
    ):
        adaptors = train_adaptor_set(tiny_backbone, tiny_pool, pseudo_labels[0], config)

        adapted = AdaptedViT(tiny_backbone, adaptors)(tiny_images)

        assert not torch.allclose(adapted, tiny_backbone(tiny_images))

    def test_seeded(self, tiny_backbone, tiny_pool, pseudo_labels, config):
        first = train_adaptor_set(tiny_backbone, tiny_pool, pseudo_labels[0], config)
        second = train_adaptor_set(tiny_backbone, tiny_pool, pseudo_labels[0], config)

        assert parameters_sha256(first) == parameters_sha256(second)

    def test_no_scalar_conversion_warning(self, tiny_backbone, tiny_pool, pseudo_labels, config):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            train_adaptor_set(tiny_backbone, tiny_pool, pseudo_labels[0], config)

        assert not [w for w in caught if "requires_grad" in str(w.message)]

    def test_pool_size_checked(self, tiny_backbone, tiny_pool, config, rng):
        (labels,) = build_granularities(rng.standard_normal((5, 3)), [2], seed=0)

        with pytest.raises(ShapeMismatchError):
            train_adaptor_set(tiny_backbone, tiny_pool, labels, config)

    def test_default_bottleneck(self):
        assert AdaptorConfig().resolve_bottleneck(384) == 96


class TestPseudoLabelFit:
    """Adaptors learn a separable pseudo-labelling."""

    def test_fits_four_colour_clusters(self, tiny_backbone):
        generator = torch.Generator().manual_seed(0)
        colours = torch.tensor(
            [[0.9, 0.1, 0.1], [0.1, 0.9, 0.1], [0.1, 0.1, 0.9], [0.9, 0.9, 0.9]]
        )
        members = torch.arange(200) % 4
        images = colours[members][:, None, None, :].expand(200, 16, 16, 3)
        images = (images + 0.05 * torch.rand(200, 16, 16, 3, generator=generator)).clamp(0, 1)
        pool = UnlabeledPool(images=images, ids=tuple(f"img{i:03d}" for i in range(200)))
        store = extract_feature_store(tiny_backbone, pool)
        (labels,) = build_granularities(store.features, [4], seed=0)
        config = AdaptorConfig(bottleneck_dim=4, epochs=20, batch_size=20, learning_rate=1e-2)

        adaptors = train_adaptor_set(tiny_backbone, pool, labels, config)

        assert adaptors.provenance.final_accuracy >= 0.95


class TestAdaptorStorage:
    """Test adaptor checkpoints."""

    def test_round_trip(self, tmp_path, tiny_backbone, tiny_pool, tiny_images, pseudo_labels, config):
        adaptors = train_adaptor_set(tiny_backbone, tiny_pool, pseudo_labels[1], config)
        path = save_adaptor_set(adaptor_path(tmp_path, 1), adaptors)

        loaded = load_adaptor_set(path)

        assert path.name == "adaptors_1.json"
        assert loaded.granularity == 1
        assert loaded.provenance == adaptors.provenance
        assert parameters_sha256(loaded) == parameters_sha256(adaptors)
        torch.testing.assert_close(
            AdaptedViT(tiny_backbone, loaded)(tiny_images),
            AdaptedViT(tiny_backbone, adaptors)(tiny_images),
        )
