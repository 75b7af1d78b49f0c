"""Fusion configuration and provenance models."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

from ..data import AugmentPolicy

FusionVariant = Literal["avg", "tc", "ac", "random", "random_single"]
RANDOM_VARIANTS: tuple[FusionVariant, ...] = ("random", "random_single")
KnnSource = Literal["model", "backbone"]


class FusionConfig(BaseModel):
    """Step-3 hyper-parameters.

    Variants
    --------
    ``avg``
        Uniform average of the adaptor outputs; nothing is trained
    ``tc``
        Barlow Twins on two augmentations of the same image
    ``ac``
        Barlow Twins on k-NN neighbour pairs (attention consistency)
    ``random``
        Randomly initialised adaptors fine-tuned jointly with the fusion
        layers on ``tc`` pairs (parameter-matched baseline)
    ``random_single``
        One randomly initialised adaptor set trained on ``tc`` pairs, no
        fusion (single-adaptor self-supervised baseline)
    """

    variant: FusionVariant = Field(default="ac", description="Fusion training variant")
    k_nn: int = Field(default=5, ge=1, description="Neighbours per image for ac pairs")
    knn_source: KnnSource = Field(
        default="model",
        description="Neighbours from the current fused model (refreshed each epoch) "
        "or once from the frozen backbone",
    )
    beta: float = Field(default=0.005, ge=0.0, description="Off-diagonal weight")
    loss_scale: float = Field(default=1.0, gt=0.0, description="Barlow Twins loss scale")
    projector_dim: int | None = Field(
        default=None, ge=1, description="Projector hidden/output width; 4 * D when unset"
    )
    learning_rate: float = Field(default=0.5, gt=0.0, description="LARS learning rate")
    weight_decay: float = Field(default=1e-3, ge=0.0, description="LARS weight decay")
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0, description="LARS momentum")
    epochs: int = Field(default=10, ge=1)
    batch_size: int = Field(default=64, ge=2, description="Pairs per step")
    include_class_token: bool = Field(
        default=True, description="Pool the class token with the patch tokens"
    )
    scale_logits: bool = Field(default=True, description="Divide attention logits by sqrt(D)")
    augment: AugmentPolicy = Field(default_factory=AugmentPolicy)
    supervised_learning_rate: float = Field(
        default=1e-3, gt=0.0, description="Adam learning rate of supervised fusion"
    )
    supervised_gamma: float = Field(
        default=25.0, ge=0.0, description="Norm-softmax scale of supervised fusion"
    )
    random_bottleneck_dim: int | None = Field(
        default=None, ge=1, description="Bottleneck of random adaptors; D // 4 when unset"
    )
    seed: int = Field(default=0)


class FusionProvenance(BaseModel):
    """Training record stored with a fusion checkpoint."""

    variant: str
    supervised: bool = False
    granularities: list[int] = Field(default_factory=list)
    seed: int = 0
    epochs: int = 0
    loss_history: list[float] = Field(default_factory=list)
    entropy_history: list[float] = Field(default_factory=list)
    final_accuracy: float | None = None
