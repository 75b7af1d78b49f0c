"""Adaptor training against one pseudo-label set."""

from __future__ import annotations

import logging

import torch

from ..backbone import VisionTransformer
from ..checkpoint import parameters_sha256
from ..data import UnlabeledPool
from ..errors import InvariantViolationError, NumericalDivergenceError, ShapeMismatchError
from ..pseudolabels import PseudoLabelSet
from .head import NormSoftmaxHead, norm_softmax_loss
from .layers import AdaptedViT, AdaptorSet
from .models import AdaptorConfig, AdaptorProvenance

logger = logging.getLogger(__name__)


def train_adaptor_set(
    backbone: VisionTransformer,
    pool: UnlabeledPool,
    pseudo_labels: PseudoLabelSet,
    config: AdaptorConfig,
) -> AdaptorSet:
    """Train a fresh adaptor set to classify the pool into its pseudo-labels.

    Only the adaptors and a norm-softmax head are optimised (Adam); the head
    is dropped afterwards. Seeds are derived from ``config.seed`` and the
    granularity index, so every set trains independently and reproducibly.

    Parameters
    ----------
    backbone : VisionTransformer
        Frozen backbone
    pool : UnlabeledPool
        Training images, in the order the pseudo-labels were computed
    pseudo_labels : PseudoLabelSet
        Cluster assignment of every pool image
    config : AdaptorConfig
        Bottleneck width, norm-softmax scale and optimiser settings

    Returns
    -------
    AdaptorSet
        Frozen trained adaptors with provenance attached

    Raises
    ------
    ShapeMismatchError
        If pool and pseudo-labels have different sizes
    NumericalDivergenceError
        If the loss becomes NaN or infinite
    InvariantViolationError
        If the backbone parameters changed during training
    """
    if len(pool) != pseudo_labels.n_images:
        raise ShapeMismatchError(
            "pseudo-labels", expected=len(pool), actual=pseudo_labels.n_images
        )
    dim = backbone.config.dim
    seed = config.seed + pseudo_labels.index
    backbone.freeze()
    backbone_hash = parameters_sha256(backbone)

    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        adaptors = AdaptorSet.for_backbone(
            backbone, config.resolve_bottleneck(dim), granularity=pseudo_labels.index
        )
        head = NormSoftmaxHead(pseudo_labels.k, dim, gamma=config.gamma)

    model = AdaptedViT(backbone, adaptors)
    optimizer = torch.optim.Adam(
        [*adaptors.parameters(), *head.parameters()],
        lr=config.learning_rate,
        weight_decay=config.weight_decay,
    )
    generator = torch.Generator().manual_seed(seed)
    targets = torch.from_numpy(pseudo_labels.assignments.astype("int64"))
    n = len(pool)

    epoch_loss = epoch_accuracy = float("nan")
    for epoch in range(1, config.epochs + 1):
        adaptors.train()
        total_loss, correct = 0.0, 0
        for batch in torch.randperm(n, generator=generator).split(config.batch_size):
            z = model(pool.images[batch])
            labels = targets[batch]
            loss = norm_softmax_loss(z, labels, head)
            if not bool(torch.isfinite(loss)):
                raise NumericalDivergenceError("adaptor training loss", epoch=epoch)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total_loss += loss.item() * len(batch)
            with torch.no_grad():
                correct += int((head.cosine(z).argmax(dim=1) == labels).sum())
        epoch_loss, epoch_accuracy = total_loss / n, correct / n
        logger.info(
            f"Adaptors g{pseudo_labels.index} (k={pseudo_labels.k}) epoch {epoch}/"
            f"{config.epochs}: loss={epoch_loss:.4f} acc={epoch_accuracy:.3f}"
        )

    if parameters_sha256(backbone) != backbone_hash:
        raise InvariantViolationError("Frozen backbone", "parameters changed during adaptor training")

    adaptors.provenance = AdaptorProvenance(
        granularity=pseudo_labels.index,
        num_clusters=pseudo_labels.k,
        pseudo_label_seed=pseudo_labels.seed,
        feature_fingerprint=pseudo_labels.fingerprint,
        backbone_fingerprint=backbone_hash,
        epochs=config.epochs,
        seed=seed,
        final_loss=epoch_loss,
        final_accuracy=epoch_accuracy,
    )
    return adaptors.freeze()
