"""On-disk form of pseudo-label sets: one ``.npz`` file per granularity."""

from __future__ import annotations

import io
import json
import logging
from pathlib import Path

import numpy as np

from ..artifacts import atomic_write_bytes
from ..errors import ConfigError
from ..settings import ARTIFACT_FORMAT_VERSION
from .models import PseudoLabelSet

logger = logging.getLogger(__name__)


def pseudolabel_path(directory: Path, index: int) -> Path:
    """Path of the file holding granularity ``index``."""
    return directory / f"pseudolabels_{index}.npz"


def save_pseudolabels(path: Path, labels: PseudoLabelSet) -> Path:
    """Write centroids, assignments and provenance to one ``.npz`` file."""
    metadata = {
        "format_version": ARTIFACT_FORMAT_VERSION,
        "index": labels.index,
        "k": labels.k,
        "inertia": labels.inertia,
        "seed": labels.seed,
        "fingerprint": labels.fingerprint,
        "normalized": labels.normalized,
    }
    buffer = io.BytesIO()
    np.savez(
        buffer,
        centroids=labels.centroids,
        assignments=labels.assignments,
        inertia_history=np.asarray(labels.inertia_history, dtype=np.float64),
        metadata=np.asarray(json.dumps(metadata, sort_keys=True)),
    )
    atomic_write_bytes(path, buffer.getvalue())
    logger.info(f"Saved pseudo-labels k={labels.k} to {path}")
    return path


def load_pseudolabels(path: Path) -> PseudoLabelSet:
    """Read a file written by `save_pseudolabels`.

    Raises
    ------
    ConfigError
        If the file was written by an incompatible format version
    """
    with np.load(path, allow_pickle=False) as data:
        metadata = json.loads(str(data["metadata"]))
        if metadata.get("format_version") != ARTIFACT_FORMAT_VERSION:
            raise ConfigError(
                f"Unsupported pseudo-label format in {path}", {"path": str(path)}
            )
        return PseudoLabelSet(
            index=int(metadata["index"]),
            k=int(metadata["k"]),
            centroids=data["centroids"].astype(np.float64),
            assignments=data["assignments"].astype(np.int64),
            inertia=float(metadata["inertia"]),
            seed=int(metadata["seed"]),
            fingerprint=str(metadata["fingerprint"]),
            inertia_history=tuple(float(v) for v in data["inertia_history"]),
            normalized=bool(metadata["normalized"]),
        )
