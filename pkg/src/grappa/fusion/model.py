"""The fused multi-adaptor model."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from typing import Literal

import torch
from torch import nn

from ..adaptors import AdaptorSet
from ..backbone import VisionTransformer, ensure_finite
from ..errors import ConfigError, InvariantViolationError, ShapeMismatchError
from ..settings import get_settings
from .layers import FusionLayer, avg_fuse_layer, fuse_layer
from .models import FusionProvenance

logger = logging.getLogger(__name__)

FusionMode = Literal["attention", "avg"]

# Tolerance of the runtime check that attention rows sum to one
ATTENTION_SUM_TOLERANCE = 1e-5


def check_attention(alpha: torch.Tensor, layer_index: int) -> None:
    """Raise unless every row of ``alpha`` is non-negative and sums to one."""
    if bool((alpha < 0).any()):
        raise InvariantViolationError(
            "Attention normalisation", f"negative weight at layer {layer_index}"
        )
    error = float((alpha.sum(dim=-1) - 1.0).abs().max())
    if error > ATTENTION_SUM_TOLERANCE:
        raise InvariantViolationError(
            "Attention normalisation",
            f"weights at layer {layer_index} sum to 1 +/- {error:.2e}",
        )


class GrappaModel(nn.Module):
    """Frozen backbone, N adaptor sets in parallel and per-layer fusion.

    Parameters
    ----------
    backbone : VisionTransformer
        Frozen backbone
    adaptor_sets : Sequence[AdaptorSet]
        Adaptor sets ordered by granularity
    fusion : FusionMode, optional
        ``"attention"`` (learned Q/K) or ``"avg"`` (uniform) (default: "attention")
    include_class_token : bool, optional
        Pool the class token when computing attention (default: True)
    scale_logits : bool, optional
        Divide attention logits by sqrt(D) (default: True)
    """

    def __init__(
        self,
        backbone: VisionTransformer,
        adaptor_sets: Sequence[AdaptorSet],
        fusion: FusionMode = "attention",
        include_class_token: bool = True,
        scale_logits: bool = True,
    ) -> None:
        super().__init__()
        if not adaptor_sets:
            raise ConfigError("GrappaModel needs at least one adaptor set")
        if fusion not in ("attention", "avg"):
            raise ConfigError(f"Unknown fusion mode {fusion!r}")
        config = backbone.config
        for adaptors in adaptor_sets:
            if adaptors.num_layers != config.num_layers or adaptors.dim != config.dim:
                raise ShapeMismatchError(
                    f"adaptor set g{adaptors.granularity}",
                    expected=(config.num_layers, config.dim),
                    actual=(adaptors.num_layers, adaptors.dim),
                )
        self.backbone = backbone
        self.adaptor_sets = nn.ModuleList(adaptor_sets)
        self.fusion = fusion
        # avg fusion has nothing to learn
        self.fusion_layers = nn.ModuleList()
        if fusion == "attention":
            self.fusion_layers.extend(
                FusionLayer(config.dim, index, include_class_token, scale_logits)
                for index in range(config.num_layers)
            )
        # Barlow Twins projector g, attached only while Step 3 trains
        self.projector: nn.Module | None = None
        self.provenance: FusionProvenance | None = None

    @property
    def num_adaptor_sets(self) -> int:
        return len(self.adaptor_sets)

    @property
    def granularities(self) -> list[int]:
        return [a.granularity for a in self.adaptor_sets]

    def forward_with_attention(
        self, images: torch.Tensor
    ) -> tuple[torch.Tensor, list[torch.Tensor]]:
        """Features ``z = f*(x)`` plus the attention of every layer, each (batch, N)."""
        check = get_settings().check_invariants
        h = self.backbone.embed(images)
        attention: list[torch.Tensor] = []
        for index, block in enumerate(self.backbone.blocks):
            h_tilde, y = block.branches(h)
            h_bar = y + h_tilde
            ensure_finite(h_bar, "transformer layer", index + 1)
            deltas = [adaptors.layers[index].delta(h_bar) for adaptors in self.adaptor_sets]
            if self.fusion == "attention":
                h, alpha = fuse_layer(h_tilde, h_bar, deltas, self.fusion_layers[index], y)
            else:
                h, alpha = avg_fuse_layer(h_tilde, h_bar, deltas, y)
            if check:
                check_attention(alpha, index + 1)
            ensure_finite(h, "fusion layer", index + 1)
            attention.append(alpha)
        return self.backbone.readout(h), attention

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        z, _ = self.forward_with_attention(images)
        return z

    def trainable_parameters(self, finetune_adaptors: bool = False) -> dict[str, nn.Parameter]:
        """Step-3 registry: Q/K of every layer and the attached projector ``g``.

        Adaptor weights join the registry only when they are fine-tuned.
        """
        params = {f"fusion_layers.{n}": p for n, p in self.fusion_layers.named_parameters()}
        if self.projector is not None:
            params.update({f"projector.{n}": p for n, p in self.projector.named_parameters()})
        if finetune_adaptors:
            params.update(
                {f"adaptor_sets.{n}": p for n, p in self.adaptor_sets.named_parameters()}
            )
        return params

    def prepare_for_training(
        self, finetune_adaptors: bool = False, projector: nn.Module | None = None
    ) -> dict[str, nn.Parameter]:
        """Attach ``projector``, freeze everything outside the registry and return it."""
        self.projector = projector
        self.backbone.freeze()
        self.adaptor_sets.requires_grad_(finetune_adaptors)
        self.fusion_layers.requires_grad_(True)
        if projector is not None:
            projector.requires_grad_(True)
        return self.trainable_parameters(finetune_adaptors)

    def detach_projector(self) -> nn.Module | None:
        """Drop the training-only projector and return it."""
        projector, self.projector = self.projector, None
        return projector

    @torch.no_grad()
    def mean_attention(self, images: torch.Tensor, batch_size: int = 256) -> torch.Tensor:
        """Attention averaged over layers and images, shape (N,)."""
        was_training = self.training
        self.eval()
        try:
            total = torch.zeros(self.num_adaptor_sets, dtype=torch.float64)
            for start in range(0, images.shape[0], batch_size):
                _, attention = self.forward_with_attention(images[start : start + batch_size])
                stacked = torch.stack(attention)  # (layers, batch, N)
                total += stacked.to(torch.float64).mean(dim=0).sum(dim=0)
        finally:
            self.train(was_training)
        return total / images.shape[0]

    @torch.no_grad()
    def attention_entropy(self, images: torch.Tensor, batch_size: int = 256) -> float:
        """Mean entropy of the per-image attention, over layers and images.

        Uniform attention gives ``log N``.
        """
        if self.num_adaptor_sets == 1:
            return 0.0
        was_training = self.training
        self.eval()
        try:
            total, count = 0.0, 0
            for start in range(0, images.shape[0], batch_size):
                _, attention = self.forward_with_attention(images[start : start + batch_size])
                for alpha in attention:
                    a = alpha.to(torch.float64).clamp_min(1e-30)
                    total += float(-(a * a.log()).sum(dim=-1).sum())
                    count += alpha.shape[0]
        finally:
            self.train(was_training)
        return total / count if count else math.log(self.num_adaptor_sets)
