"""Test configuration and fixtures."""

from __future__ import annotations

from typing import Any

import numpy as np
import pytest
import torch

from grappa.adaptors import AdaptorSet
from grappa.backbone import BackboneConfig, VisionTransformer, init_backbone
from grappa.data import SyntheticSpec, UnlabeledPool


@pytest.fixture(autouse=True)
def reset_global_singletons() -> Any:
    """Reset module-level singletons before each test.

    Settings and the error handler are cached on first use; without a reset
    a test that sets ``GRAPPA_*`` variables would leak into later tests.
    """
    import grappa.errors.handlers as handlers_module
    import grappa.settings as settings_module

    settings_module._settings = None
    handlers_module._error_handler = None
    yield
    settings_module._settings = None
    handlers_module._error_handler = None


@pytest.fixture
def tiny_config() -> BackboneConfig:
    """Two-layer backbone on 16x16 images with four patches."""
    return BackboneConfig(
        image_height=16,
        image_width=16,
        patch_size=8,
        num_layers=2,
        dim=16,
        num_heads=2,
        mlp_hidden_dim=32,
    )


@pytest.fixture
def tiny_backbone(tiny_config: BackboneConfig) -> VisionTransformer:
    """Frozen randomly initialised backbone."""
    return init_backbone(tiny_config, seed=0).freeze()


@pytest.fixture
def tiny_images() -> torch.Tensor:
    """Six channels-last images in [0, 1]."""
    generator = torch.Generator().manual_seed(0)
    return torch.rand(6, 16, 16, 3, generator=generator)


@pytest.fixture
def tiny_pool() -> UnlabeledPool:
    """Unlabeled pool of twelve random images."""
    generator = torch.Generator().manual_seed(1)
    images = torch.rand(12, 16, 16, 3, generator=generator)
    return UnlabeledPool(images=images, ids=tuple(f"img{i:02d}" for i in range(12)))


@pytest.fixture
def tiny_spec() -> SyntheticSpec:
    """Two-task synthetic benchmark small enough for unit tests."""
    return SyntheticSpec(
        levels=["coarse", "fine"],
        num_shapes=4,
        colors_per_shape=1,
        textures_per_color=2,
        images_per_class=4,
        image_size=16,
        noise=0.05,
        seed=0,
    )


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded numpy generator."""
    return np.random.default_rng(0)


@pytest.fixture
def random_sets(tiny_backbone: VisionTransformer) -> list[AdaptorSet]:
    """Three frozen adaptor sets with non-zero up-projections."""
    torch.manual_seed(0)
    sets = [
        AdaptorSet.for_backbone(tiny_backbone, 4, granularity=g, zero_init_up=False)
        for g in range(3)
    ]
    for adaptors in sets:
        with torch.no_grad():
            for layer in adaptors.layers:
                layer.up.weight.mul_(20.0)
        adaptors.freeze()
    return sets


@pytest.fixture
def tiny_pipeline_config(tmp_path, tiny_config: BackboneConfig, tiny_spec: SyntheticSpec):
    """Pipeline config that runs every step in seconds."""
    from grappa.pipeline import PipelineConfig

    return PipelineConfig.model_validate(
        {
            "seed": 0,
            "out_dir": str(tmp_path / "run"),
            "backbone": {"config": tiny_config.model_dump(), "feature_batch_size": 8},
            "pseudolabels": {"k_list": [2, 4], "max_iters": 20},
            "adaptors": {"bottleneck_dim": 4, "epochs": 1, "batch_size": 8},
            "fusion": {
                "epochs": 1,
                "batch_size": 8,
                "k_nn": 2,
                "projector_dim": 8,
                "variants": ["avg", "ac"],
            },
            "eval": {"batch_size": 8, "plot": False},
            "data": {"synthetic": tiny_spec.model_dump()},
        }
    )
