"""Frozen Vision Transformer backbone."""

from __future__ import annotations

from .loading import (
    import_timm_state_dict,
    init_backbone,
    load_backbone,
    load_or_init_backbone,
    save_backbone,
)
from .models import BackboneConfig, BackboneSource, TokenTensor
from .patches import patchify, unpatchify
from .vit import (
    VisionTransformer,
    ViTLayer,
    encode_images,
    ensure_finite,
    extract_feature,
    vit_layer_forward,
)

__all__ = [
    "BackboneConfig",
    "BackboneSource",
    "TokenTensor",
    "ViTLayer",
    "VisionTransformer",
    "encode_images",
    "ensure_finite",
    "extract_feature",
    "import_timm_state_dict",
    "init_backbone",
    "load_backbone",
    "load_or_init_backbone",
    "patchify",
    "save_backbone",
    "unpatchify",
    "vit_layer_forward",
]
