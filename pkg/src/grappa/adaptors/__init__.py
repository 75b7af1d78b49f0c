"""Per-granularity bottleneck adaptors and their pseudo-label training."""

from __future__ import annotations

from .head import NormSoftmaxHead, norm_softmax_loss
from .layers import AdaptedViT, AdaptorLayer, AdaptorSet, adaptor_forward
from .models import AdaptorConfig, AdaptorProvenance
from .storage import adaptor_path, load_adaptor_set, save_adaptor_set
from .training import train_adaptor_set

__all__ = [
    "AdaptedViT",
    "AdaptorConfig",
    "AdaptorLayer",
    "AdaptorProvenance",
    "AdaptorSet",
    "NormSoftmaxHead",
    "adaptor_forward",
    "adaptor_path",
    "load_adaptor_set",
    "norm_softmax_loss",
    "save_adaptor_set",
    "train_adaptor_set",
]
