"""Backbone data models."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import torch
from pydantic import BaseModel, Field, model_validator

# DINO weights expect ImageNet-standardised inputs
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


class BackboneConfig(BaseModel):
    """Shape of a Vision Transformer backbone.

    The defaults describe the desk-scale model (32x32x3 images, 8-pixel
    patches, 4 layers of width 64). `BackboneConfig.vit_small()` gives the
    ViT-S/16 geometry used with DINO weights.
    """

    image_height: int = Field(default=32, ge=1, description="Input height H in pixels")
    image_width: int = Field(default=32, ge=1, description="Input width W in pixels")
    channels: int = Field(default=3, ge=1, description="Input channels C")
    patch_size: int = Field(default=8, ge=1, description="Patch side P in pixels")
    num_layers: int = Field(default=4, ge=1, description="Transformer layers L")
    dim: int = Field(default=64, ge=1, description="Token width D")
    num_heads: int = Field(default=4, ge=1, description="Attention heads")
    mlp_hidden_dim: int = Field(default=128, ge=1, description="MLP hidden width")
    layer_norm_eps: float = Field(default=1e-6, gt=0.0)
    gelu_approximate: str = Field(
        default="none",
        pattern="^(none|tanh)$",
        description="GELU variant: exact erf-based ('none') or tanh approximation",
    )
    init_std: float = Field(
        default=0.02, gt=0.0, description="Truncated-normal std for random init"
    )
    pixel_mean: tuple[float, ...] | None = Field(
        default=None,
        description="Per-channel mean subtracted from [0, 1] pixels; unset keeps raw pixels",
    )
    pixel_std: tuple[float, ...] | None = Field(
        default=None,
        description="Per-channel std dividing [0, 1] pixels before patching",
    )

    @model_validator(mode="after")
    def validate_geometry(self) -> BackboneConfig:
        """Ensure patches tile the image and heads split the width."""
        if self.image_height % self.patch_size or self.image_width % self.patch_size:
            raise ValueError(
                f"Image size {self.image_height}x{self.image_width} is not divisible "
                f"by patch size {self.patch_size}"
            )
        if self.dim % self.num_heads:
            raise ValueError(
                f"dim {self.dim} is not divisible by num_heads {self.num_heads}"
            )
        for name in ("pixel_mean", "pixel_std"):
            values = getattr(self, name)
            if values is not None and len(values) != self.channels:
                raise ValueError(f"{name} needs one value per channel")
        if self.pixel_std is not None and any(s <= 0 for s in self.pixel_std):
            raise ValueError("pixel_std values must be positive")
        return self

    @property
    def num_patches(self) -> int:
        """Number of patch tokens T = HW / P^2."""
        return (self.image_height // self.patch_size) * (
            self.image_width // self.patch_size
        )

    @property
    def patch_dim(self) -> int:
        """Flattened patch length P^2 * C."""
        return self.patch_size * self.patch_size * self.channels

    @classmethod
    def vit_small(cls) -> BackboneConfig:
        """ViT-Small with 16-pixel patches on 224x224 inputs."""
        return cls(
            image_height=224,
            image_width=224,
            patch_size=16,
            num_layers=12,
            dim=384,
            num_heads=6,
            mlp_hidden_dim=1536,
            pixel_mean=IMAGENET_MEAN,
            pixel_std=IMAGENET_STD,
        )


class BackboneSource(BaseModel):
    """Where backbone parameters come from: a checkpoint or a seeded init."""

    checkpoint: Path | None = Field(
        default=None, description="Checkpoint manifest to load; random init when unset"
    )
    seed: int = Field(default=0, description="Seed for random initialisation")
    config: BackboneConfig = Field(default_factory=BackboneConfig)


@dataclass(frozen=True)
class TokenTensor:
    """Token activations of one layer.

    Attributes
    ----------
    data : torch.Tensor
        Activations of shape (batch, T + 1, D); row 0 is the class token
    layer_index : int
        0 for the embedding output h^0, l for the output of layer l
    """

    data: torch.Tensor
    layer_index: int
