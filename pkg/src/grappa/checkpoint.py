"""Versioned tensor archive used for every model checkpoint.

Layout (format version 1)
-------------------------
``<name>.json``
    Manifest: ``format_version``, ``kind``, ``config``, ``metadata`` and a
    ``tensors`` list of ``{name, shape, dtype, offset, nbytes}``.
``<name>.bin``
    The tensors' raw little-endian float32 bytes, concatenated in manifest
    order.

Float32 values round-trip bit-exactly; tensors of other float dtypes are
cast to float32 on save.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import torch

from .artifacts import atomic_write_bytes, atomic_write_json
from .errors import ConfigError, ShapeMismatchError
from .settings import ARTIFACT_FORMAT_VERSION

logger = logging.getLogger(__name__)

_DTYPE = "<f4"


@dataclass
class TensorArchive:
    """In-memory form of a checkpoint."""

    kind: str
    tensors: dict[str, torch.Tensor]
    config: dict[str, Any] = field(default_factory=dict)
    metadata: dict[str, Any] = field(default_factory=dict)


def blob_path(manifest_path: Path) -> Path:
    """Path of the raw tensor blob that belongs to a manifest."""
    return manifest_path.with_suffix(".bin")


def save_archive(path: Path, archive: TensorArchive) -> Path:
    """Write a checkpoint manifest and its tensor blob.

    Parameters
    ----------
    path : Path
        Manifest path (``.json``); the blob goes next to it as ``.bin``
    archive : TensorArchive
        Tensors and metadata to store

    Returns
    -------
    Path
        The manifest path
    """
    entries: list[dict[str, Any]] = []
    chunks: list[bytes] = []
    offset = 0
    for name, tensor in archive.tensors.items():
        array = tensor.detach().cpu().to(torch.float32).numpy().astype(_DTYPE)
        raw = array.tobytes(order="C")
        entries.append(
            {
                "name": name,
                "shape": list(array.shape),
                "dtype": "float32",
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        chunks.append(raw)
        offset += len(raw)

    atomic_write_bytes(blob_path(path), b"".join(chunks))
    atomic_write_json(
        path,
        {
            "format_version": ARTIFACT_FORMAT_VERSION,
            "kind": archive.kind,
            "config": archive.config,
            "metadata": archive.metadata,
            "tensors": entries,
        },
    )
    logger.info(f"Saved {archive.kind} checkpoint to {path} ({offset} bytes)")
    return path


def load_archive(path: Path, expected_kind: str | None = None) -> TensorArchive:
    """Read a checkpoint written by `save_archive`.

    Parameters
    ----------
    path : Path
        Manifest path
    expected_kind : str | None, optional
        When given, the manifest kind must match (default: None)

    Returns
    -------
    TensorArchive
        Loaded tensors (float32) with config and metadata

    Raises
    ------
    ConfigError
        If the format version or kind does not match, or the blob is truncated
    """
    manifest = json.loads(path.read_text(encoding="utf-8"))
    version = manifest.get("format_version")
    if version != ARTIFACT_FORMAT_VERSION:
        raise ConfigError(
            f"Unsupported checkpoint format version {version} in {path}",
            {"path": str(path)},
        )
    kind = manifest["kind"]
    if expected_kind is not None and kind != expected_kind:
        raise ConfigError(
            f"Checkpoint {path} holds a {kind!r}, expected {expected_kind!r}",
            {"path": str(path)},
        )

    blob = blob_path(path).read_bytes()
    tensors: dict[str, torch.Tensor] = {}
    for entry in manifest["tensors"]:
        start, nbytes = entry["offset"], entry["nbytes"]
        if start + nbytes > len(blob):
            raise ConfigError(f"Truncated tensor blob for {path}", {"path": str(path)})
        array = np.frombuffer(blob[start : start + nbytes], dtype=_DTYPE)
        shape = tuple(entry["shape"])
        tensors[entry["name"]] = torch.from_numpy(array.reshape(shape).copy())
    return TensorArchive(
        kind=kind,
        tensors=tensors,
        config=manifest.get("config", {}),
        metadata=manifest.get("metadata", {}),
    )


def load_into_module(module: torch.nn.Module, tensors: dict[str, torch.Tensor]) -> None:
    """Copy archived tensors into a module, checking names and shapes.

    Raises
    ------
    ShapeMismatchError
        If a tensor is missing, unexpected, or has the wrong shape
    """
    state = module.state_dict()
    missing = sorted(set(state) - set(tensors))
    unexpected = sorted(set(tensors) - set(state))
    if missing or unexpected:
        raise ShapeMismatchError(
            "state_dict",
            expected=missing,
            actual=unexpected,
            message=f"Checkpoint tensors do not match the model: missing={missing}, unexpected={unexpected}",
        )
    for name, value in state.items():
        if tuple(value.shape) != tuple(tensors[name].shape):
            raise ShapeMismatchError(
                name, expected=tuple(value.shape), actual=tuple(tensors[name].shape)
            )
    with torch.no_grad():
        for name, value in state.items():
            value.copy_(tensors[name].to(value.dtype))


def parameters_sha256(module: torch.nn.Module) -> str:
    """SHA-256 over a module's named state, used for frozen-parameter audits."""
    digest = hashlib.sha256()
    for name, value in sorted(module.state_dict().items()):
        digest.update(name.encode("utf-8"))
        digest.update(value.detach().cpu().contiguous().numpy().tobytes())
    return digest.hexdigest()
