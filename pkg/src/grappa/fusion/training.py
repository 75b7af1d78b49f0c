"""Step-3 training of the fusion layers."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from typing import Any

import numpy as np
import torch
from torch import nn

from ..adaptors import AdaptorSet, NormSoftmaxHead, norm_softmax_loss
from ..backbone import VisionTransformer, encode_images
from ..checkpoint import parameters_sha256
from ..data import TaskDataset, UnlabeledPool
from ..errors import ConfigError, InvariantViolationError, NumericalDivergenceError
from .lars import LARS
from .losses import Projector, barlow_twins_loss
from .model import GrappaModel
from .models import RANDOM_VARIANTS, FusionConfig, FusionProvenance, FusionVariant
from .neighbors import NeighborGraph, build_knn_graph, sample_pairs

logger = logging.getLogger(__name__)


def random_adaptor_sets(
    backbone: VisionTransformer, count: int, config: FusionConfig
) -> list[AdaptorSet]:
    """Randomly initialised adaptor sets (non-zero up-projection) for the baselines."""
    bottleneck = config.random_bottleneck_dim or max(1, backbone.config.dim // 4)
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        return [
            AdaptorSet.for_backbone(backbone, bottleneck, granularity=i, zero_init_up=False)
            for i in range(count)
        ]


def _optimizer(registry: dict[str, nn.Parameter], config: FusionConfig) -> LARS:
    """LARS over ``g`` and fine-tuned adaptors; Q/K in a plain momentum group.

    Q starts at zero, where trust-ratio steps stay near zero, and K must not
    decay away from the identity.
    """
    attention = [p for name, p in registry.items() if name.startswith("fusion_layers.")]
    adapted = [p for name, p in registry.items() if not name.startswith("fusion_layers.")]
    groups: list[dict[str, Any]] = [{"params": adapted}]
    if attention:
        groups.append({"params": attention, "lars_adapt": False, "weight_decay": 0.0})
    return LARS(
        groups,
        lr=config.learning_rate,
        weight_decay=config.weight_decay,
        momentum=config.momentum,
    )


def _frozen_hash(model: GrappaModel, finetune_adaptors: bool) -> str:
    parts = [parameters_sha256(model.backbone)]
    if not finetune_adaptors:
        parts.append(parameters_sha256(model.adaptor_sets))
    return "/".join(parts)


def _neighbor_graph(
    model: GrappaModel,
    pool: UnlabeledPool,
    config: FusionConfig,
    epoch: int,
    static: NeighborGraph | None,
) -> NeighborGraph:
    if static is not None:
        return static
    return build_knn_graph(encode_images(model, pool.images), config.k_nn, epoch=epoch)


def train_fusion(
    model: GrappaModel,
    pool: UnlabeledPool,
    variant: FusionVariant,
    config: FusionConfig,
) -> GrappaModel:
    """Train the fusion layers with the Barlow Twins loss on image pairs.

    Parameters
    ----------
    model : GrappaModel
        Model to train; backbone and (unless ``variant`` is a random-adaptor
        baseline) adaptors stay frozen
    pool : UnlabeledPool
        Unlabeled training images
    variant : FusionVariant
        ``"avg"`` returns the model untouched, ``"tc"`` uses augmented pairs,
        ``"ac"`` neighbour pairs. ``"random"`` trains randomly initialised
        adaptors jointly with the attention on tc pairs, and
        ``"random_single"`` trains one random adaptor set on tc pairs with no
        fusion at all
    config : FusionConfig
        Optimiser, projector, pair and pooling settings

    Returns
    -------
    GrappaModel
        The same model, trained, in eval mode; the projector is dropped

    Raises
    ------
    ConfigError
        If the model does not fit the variant
    NumericalDivergenceError
        If the loss becomes NaN or infinite
    InvariantViolationError
        If frozen parameters changed
    """
    if variant == "avg":
        logger.info("Average fusion has no trainable parameters; skipping training")
        model.provenance = FusionProvenance(variant="avg", granularities=model.granularities)
        return model.eval()
    if variant == "random_single":
        if model.num_adaptor_sets != 1:
            raise ConfigError(
                f"Variant 'random_single' trains one adaptor set, got {model.num_adaptor_sets}"
            )
    elif model.fusion != "attention":
        raise ConfigError(f"Variant {variant!r} needs a model with attention fusion")

    finetune_adaptors = variant in RANDOM_VARIANTS
    pair_variant = "ac" if variant == "ac" else "tc"
    dim = model.backbone.config.dim
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        projector = Projector(dim, config.projector_dim or 4 * dim)
    registry = model.prepare_for_training(finetune_adaptors, projector)
    frozen_hash = _frozen_hash(model, finetune_adaptors)
    optimizer = _optimizer(registry, config)
    generator = torch.Generator().manual_seed(config.seed)

    static_graph = None
    if pair_variant == "ac" and config.knn_source == "backbone":
        static_graph = build_knn_graph(encode_images(model.backbone, pool.images), config.k_nn)

    provenance = FusionProvenance(
        variant=variant, granularities=model.granularities, seed=config.seed, epochs=config.epochs
    )
    provenance.entropy_history.append(model.attention_entropy(pool.images))
    n = len(pool)
    try:
        for epoch in range(1, config.epochs + 1):
            graph = (
                _neighbor_graph(model, pool, config, epoch, static_graph)
                if pair_variant == "ac"
                else None
            )
            model.train()
            total_loss, seen = 0.0, 0
            for anchors in torch.randperm(n, generator=generator).split(config.batch_size):
                if anchors.shape[0] < 2:
                    continue
                pairs = sample_pairs(pair_variant, pool, anchors, generator, graph, config.augment)
                loss = barlow_twins_loss(
                    model(pairs.first),
                    model(pairs.second),
                    beta=config.beta,
                    projector=projector,
                    scale=config.loss_scale,
                )
                if not bool(torch.isfinite(loss)):
                    raise NumericalDivergenceError("fusion training loss", epoch=epoch)
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                total_loss += loss.item() * anchors.shape[0]
                seen += anchors.shape[0]
            entropy = model.attention_entropy(pool.images)
            provenance.loss_history.append(total_loss / max(seen, 1))
            provenance.entropy_history.append(entropy)
            logger.info(
                f"Fusion ({variant}) epoch {epoch}/{config.epochs}: "
                f"loss={provenance.loss_history[-1]:.4f} attention_entropy={entropy:.4f} "
                f"(uniform {np.log(model.num_adaptor_sets):.4f})"
            )
    finally:
        model.detach_projector()

    if _frozen_hash(model, finetune_adaptors) != frozen_hash:
        raise InvariantViolationError("Frozen parameters", "changed during fusion training")
    model.adaptor_sets.requires_grad_(False)
    model.fusion_layers.requires_grad_(False)
    model.provenance = provenance
    return model.eval()


def _labeled_training_set(datasets: Sequence[TaskDataset]) -> tuple[torch.Tensor, torch.Tensor, int]:
    """Concatenate training splits; class ids are offset so every task keeps its own."""
    images: list[torch.Tensor] = []
    labels: list[torch.Tensor] = []
    offset = 0
    for dataset in datasets:
        if dataset.split != "train":
            raise ConfigError(f"Supervised fusion only trains on train splits, got {dataset.name}/test")
        images.append(dataset.images)
        labels.append(torch.from_numpy(dataset.labels.astype(np.int64)) + offset)
        offset += dataset.num_classes
    if not images:
        raise ConfigError("Supervised fusion needs at least one labelled dataset")
    return torch.cat(images), torch.cat(labels), offset


def train_fusion_supervised(
    model: GrappaModel, datasets: Sequence[TaskDataset], config: FusionConfig
) -> GrappaModel:
    """Train the fusion layers with class labels through a norm-softmax head (Adam).

    This is the label-aware upper reference; the head is dropped afterwards.
    """
    if model.fusion != "attention":
        raise ConfigError("Supervised fusion needs a model with attention fusion")
    images, labels, num_classes = _labeled_training_set(datasets)
    registry = model.prepare_for_training(finetune_adaptors=False)
    frozen_hash = _frozen_hash(model, finetune_adaptors=False)

    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        head = NormSoftmaxHead(num_classes, model.backbone.config.dim, config.supervised_gamma)
    optimizer = torch.optim.Adam(
        [*registry.values(), *head.parameters()],
        lr=config.supervised_learning_rate,
        weight_decay=config.weight_decay,
    )
    generator = torch.Generator().manual_seed(config.seed)
    provenance = FusionProvenance(
        variant="supervised",
        supervised=True,
        granularities=model.granularities,
        seed=config.seed,
        epochs=config.epochs,
    )
    n = images.shape[0]
    for epoch in range(1, config.epochs + 1):
        model.train()
        total_loss, correct = 0.0, 0
        for batch in torch.randperm(n, generator=generator).split(config.batch_size):
            z = model(images[batch])
            loss = norm_softmax_loss(z, labels[batch], head)
            if not bool(torch.isfinite(loss)):
                raise NumericalDivergenceError("supervised fusion loss", epoch=epoch)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total_loss += loss.item() * batch.shape[0]
            with torch.no_grad():
                correct += int((head.cosine(z).argmax(dim=1) == labels[batch]).sum())
        provenance.loss_history.append(total_loss / n)
        provenance.final_accuracy = correct / n
        logger.info(
            f"Supervised fusion epoch {epoch}/{config.epochs}: "
            f"loss={total_loss / n:.4f} acc={correct / n:.3f}"
        )

    if _frozen_hash(model, finetune_adaptors=False) != frozen_hash:
        raise InvariantViolationError("Frozen parameters", "changed during supervised fusion")
    model.fusion_layers.requires_grad_(False)
    model.provenance = provenance
    return model.eval()
