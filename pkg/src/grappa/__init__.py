"""Grappa - granularity-aware adaptors for multi-task image retrieval.

This package adapts a frozen Vision Transformer to several retrieval tasks
at once without labels: k-means pseudo-labels at several granularities,
one bottleneck adaptor set per granularity, and a per-layer attention that
fuses the adaptor sets, trained with a Barlow Twins consistency loss.
"""

from __future__ import annotations

__version__ = "0.1.0"
__description__ = "Granularity-aware adaptors for multi-task image retrieval"

from .fusion import GrappaModel
from .pipeline import PipelineConfig, run_step

__all__ = [
    "GrappaModel",
    "PipelineConfig",
    "__description__",
    "__version__",
    "run_step",
]
