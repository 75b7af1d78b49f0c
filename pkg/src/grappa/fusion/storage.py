"""Fusion checkpoints.

A checkpoint holds the Q/K projections of every layer. When the adaptors were
fine-tuned (random-adaptor baseline) their weights are stored as well;
otherwise the checkpoint refers to the Step-2 adaptor sets by granularity.
"""

from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path

import torch

from ..adaptors import AdaptorSet
from ..backbone import VisionTransformer
from ..checkpoint import TensorArchive, load_archive, load_into_module, save_archive
from ..errors import ConfigError
from .model import GrappaModel
from .models import FusionProvenance

FUSION_KIND = "fusion"


def _with_prefix(tensors: dict[str, torch.Tensor], prefix: str) -> dict[str, torch.Tensor]:
    return {name[len(prefix) :]: value for name, value in tensors.items() if name.startswith(prefix)}


def save_fusion(path: Path, model: GrappaModel, finetuned_adaptors: bool = False) -> Path:
    """Write the fusion layers (and fine-tuned adaptors) of a model."""
    tensors = {f"fusion_layers.{n}": t for n, t in model.fusion_layers.state_dict().items()}
    if finetuned_adaptors:
        tensors.update({f"adaptor_sets.{n}": t for n, t in model.adaptor_sets.state_dict().items()})
    first = model.adaptor_sets[0]
    return save_archive(
        path,
        TensorArchive(
            kind=FUSION_KIND,
            tensors=tensors,
            config={
                "fusion": model.fusion,
                "granularities": model.granularities,
                "finetuned_adaptors": finetuned_adaptors,
                "bottleneck_dim": first.bottleneck_dim,
                "include_class_token": bool(
                    model.fusion_layers[0].include_class_token if len(model.fusion_layers) else True
                ),
                "scale_logits": bool(
                    model.fusion_layers[0].scale_logits if len(model.fusion_layers) else True
                ),
            },
            metadata={
                "provenance": model.provenance.model_dump() if model.provenance else {},
            },
        ),
    )


def load_fusion(
    path: Path,
    backbone: VisionTransformer,
    adaptor_sets: Sequence[AdaptorSet] | None = None,
) -> GrappaModel:
    """Rebuild a GrappaModel from a fusion checkpoint.

    Parameters
    ----------
    path : Path
        Fusion checkpoint manifest
    backbone : VisionTransformer
        Frozen backbone
    adaptor_sets : Sequence[AdaptorSet] | None, optional
        Step-2 adaptor sets, in checkpoint granularity order; ignored when the
        checkpoint carries fine-tuned adaptors

    Raises
    ------
    ConfigError
        If the adaptor sets do not match the checkpoint's granularities
    """
    archive = load_archive(path, expected_kind=FUSION_KIND)
    config = archive.config
    granularities = [int(g) for g in config["granularities"]]
    if config["finetuned_adaptors"]:
        sets = [
            AdaptorSet.for_backbone(backbone, int(config["bottleneck_dim"]), granularity=g)
            for g in granularities
        ]
    else:
        if adaptor_sets is None:
            raise ConfigError("This fusion checkpoint needs the Step-2 adaptor sets")
        sets = list(adaptor_sets)
        if [a.granularity for a in sets] != granularities:
            raise ConfigError(
                f"Adaptor granularities {[a.granularity for a in sets]} do not match "
                f"checkpoint {granularities}",
                {"path": str(path)},
            )
    model = GrappaModel(
        backbone,
        sets,
        fusion=config["fusion"],
        include_class_token=bool(config["include_class_token"]),
        scale_logits=bool(config["scale_logits"]),
    )
    load_into_module(model.fusion_layers, _with_prefix(archive.tensors, "fusion_layers."))
    if config["finetuned_adaptors"]:
        load_into_module(model.adaptor_sets, _with_prefix(archive.tensors, "adaptor_sets."))
    provenance = archive.metadata.get("provenance")
    if provenance:
        model.provenance = FusionProvenance.model_validate(provenance)
    model.backbone.freeze()
    model.adaptor_sets.requires_grad_(False)
    model.fusion_layers.requires_grad_(False)
    return model.eval()
