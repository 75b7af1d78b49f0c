"""Adaptor configuration and provenance models."""

from __future__ import annotations

from pydantic import BaseModel, Field


class AdaptorConfig(BaseModel):
    """Hyper-parameters of one adaptor set and its pseudo-label training run."""

    bottleneck_dim: int | None = Field(
        default=None,
        ge=1,
        description="Bottleneck width D'; defaults to D // 4",
    )
    gamma: float = Field(default=25.0, ge=0.0, description="Norm-softmax scale")
    learning_rate: float = Field(default=1e-3, gt=0.0, description="Adam learning rate")
    weight_decay: float = Field(default=1e-3, ge=0.0, description="Adam weight decay")
    epochs: int = Field(default=20, ge=1, description="Training epochs")
    batch_size: int = Field(default=64, ge=1, description="Images per step")
    seed: int = Field(default=0, description="Seed of initialisation and shuffling")

    def resolve_bottleneck(self, dim: int) -> int:
        """Bottleneck width for token width ``dim``."""
        return self.bottleneck_dim if self.bottleneck_dim is not None else max(1, dim // 4)


class AdaptorProvenance(BaseModel):
    """Where a trained adaptor set came from."""

    granularity: int
    num_clusters: int
    pseudo_label_seed: int
    feature_fingerprint: str = ""
    backbone_fingerprint: str = ""
    epochs: int = 0
    seed: int = 0
    final_loss: float | None = None
    final_accuracy: float | None = None
