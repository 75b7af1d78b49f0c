"""Adaptor-set checkpoints, one per granularity."""

from __future__ import annotations

from pathlib import Path

from ..checkpoint import TensorArchive, load_archive, load_into_module, save_archive
from .layers import AdaptorSet
from .models import AdaptorProvenance

ADAPTOR_KIND = "adaptor_set"


def adaptor_path(directory: Path, granularity: int) -> Path:
    """Checkpoint manifest path of granularity ``granularity``."""
    return directory / f"adaptors_{granularity}.json"


def save_adaptor_set(path: Path, adaptors: AdaptorSet) -> Path:
    """Write an adaptor set with its shape and provenance."""
    provenance = adaptors.provenance.model_dump() if adaptors.provenance else {}
    return save_archive(
        path,
        TensorArchive(
            kind=ADAPTOR_KIND,
            tensors=dict(adaptors.state_dict()),
            config={
                "num_layers": adaptors.num_layers,
                "dim": adaptors.dim,
                "bottleneck_dim": adaptors.bottleneck_dim,
                "granularity": adaptors.granularity,
                "gelu_approximate": adaptors.gelu_approximate,
            },
            metadata={"provenance": provenance},
        ),
    )


def load_adaptor_set(path: Path) -> AdaptorSet:
    """Read an adaptor set; it comes back frozen."""
    archive = load_archive(path, expected_kind=ADAPTOR_KIND)
    config = archive.config
    adaptors = AdaptorSet(
        num_layers=int(config["num_layers"]),
        dim=int(config["dim"]),
        bottleneck_dim=int(config["bottleneck_dim"]),
        granularity=int(config["granularity"]),
        gelu_approximate=str(config["gelu_approximate"]),
    )
    load_into_module(adaptors, archive.tensors)
    provenance = archive.metadata.get("provenance")
    if provenance:
        adaptors.provenance = AdaptorProvenance.model_validate(provenance)
    return adaptors.freeze()
