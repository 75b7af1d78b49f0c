"""Backbone checkpoint loading, seeded initialisation and weight import."""

from __future__ import annotations

import logging
from collections.abc import Mapping
from pathlib import Path

import torch

from ..checkpoint import (
    TensorArchive,
    load_archive,
    load_into_module,
    parameters_sha256,
    save_archive,
)
from ..errors import ShapeMismatchError
from .models import BackboneConfig, BackboneSource
from .vit import VisionTransformer

logger = logging.getLogger(__name__)

BACKBONE_KIND = "backbone"


def init_backbone(config: BackboneConfig, seed: int) -> VisionTransformer:
    """Randomly initialise a backbone; identical seeds give identical weights."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model = VisionTransformer(config)
    return model


def save_backbone(model: VisionTransformer, path: Path) -> Path:
    """Write a backbone checkpoint (manifest + raw float32 blob)."""
    return save_archive(
        path,
        TensorArchive(
            kind=BACKBONE_KIND,
            tensors=dict(model.state_dict()),
            config=model.config.model_dump(),
            metadata={"fingerprint": parameters_sha256(model)},
        ),
    )


def load_backbone(path: Path, config: BackboneConfig | None = None) -> VisionTransformer:
    """Load a backbone checkpoint.

    Parameters
    ----------
    path : Path
        Checkpoint manifest
    config : BackboneConfig | None, optional
        Expected geometry; when given, it must agree with the checkpoint

    Returns
    -------
    VisionTransformer
        Backbone with the stored parameters (not yet frozen)

    Raises
    ------
    ShapeMismatchError
        If the requested config disagrees with the stored tensors
    """
    archive = load_archive(path, expected_kind=BACKBONE_KIND)
    stored = BackboneConfig.model_validate(archive.config)
    target = config or stored
    model = VisionTransformer(target)
    # tensor shapes are the ground truth; a config that disagrees is rejected here
    load_into_module(model, archive.tensors)
    return model


def load_or_init_backbone(source: BackboneSource) -> VisionTransformer:
    """Load a backbone from a checkpoint or initialise it from a seed, then freeze it.

    Parameters
    ----------
    source : BackboneSource
        Checkpoint path or seeded random-init settings

    Returns
    -------
    VisionTransformer
        Frozen backbone
    """
    if source.checkpoint is not None:
        model = load_backbone(source.checkpoint, source.config)
        logger.info(f"Loaded backbone from {source.checkpoint}")
    else:
        model = init_backbone(source.config, source.seed)
        logger.info(f"Initialised random backbone with seed {source.seed}")
    return model.freeze()


def import_timm_state_dict(
    state_dict: Mapping[str, torch.Tensor], config: BackboneConfig
) -> VisionTransformer:
    """Build a backbone from a timm-style ViT state dict (e.g. DINO ViT-S/16).

    The conv patch projection ``(D, C, P, P)`` is reordered to the
    ``(D, P*P*C)`` linear layout `patchify` produces; classifier heads and
    other extra keys are ignored.
    """
    model = VisionTransformer(config)
    own = model.state_dict()
    converted: dict[str, torch.Tensor] = {}
    for name in own:
        if name not in state_dict:
            raise ShapeMismatchError(name, expected=tuple(own[name].shape), actual="missing")
        value = state_dict[name]
        if name == "patch_embed.proj.weight" and value.ndim == 4:
            value = value.permute(0, 2, 3, 1).reshape(value.shape[0], -1)
        converted[name] = value
    load_into_module(model, converted)
    return model
