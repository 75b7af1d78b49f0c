"""Artifact helpers: atomic writes, content hashing and run manifests.

Every file the pipeline produces goes through `atomic_write_bytes`, so a
crashed step never leaves a half-written artifact that a later step could
mistake for a finished one.
"""

from __future__ import annotations

import hashlib
import json
import logging
import tempfile
from datetime import UTC, datetime
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field

from .settings import ARTIFACT_FORMAT_VERSION

logger = logging.getLogger(__name__)


def atomic_write_bytes(path: Path, data: bytes) -> None:
    """Write bytes atomically (temp file in the same directory, then rename).

    Parameters
    ----------
    path : Path
        Destination path
    data : bytes
        Payload to write
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    # unique per writer, so concurrent steps never share a temp file
    with tempfile.NamedTemporaryFile(
        dir=path.parent, prefix=f"{path.name}.", suffix=".tmp", delete=False
    ) as f:
        tmp_path = Path(f.name)
    try:
        tmp_path.write_bytes(data)
        tmp_path.chmod(0o644)
        tmp_path.replace(path)
    except BaseException:
        tmp_path.unlink(missing_ok=True)
        raise


def atomic_write_text(path: Path, text: str) -> None:
    """Write UTF-8 text atomically."""
    atomic_write_bytes(path, text.encode("utf-8"))


def atomic_write_json(path: Path, payload: Any) -> None:
    """Write JSON atomically with sorted keys so output is byte-stable."""
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def sha256_file(path: Path) -> str:
    """SHA-256 hex digest of a file's content."""
    digest = hashlib.sha256()
    with path.open("rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def sha256_json(payload: Any) -> str:
    """SHA-256 of the canonical JSON form of a payload."""
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ArtifactRecord(BaseModel):
    """One file read or written by a pipeline step."""

    path: str
    sha256: str


class StepRecord(BaseModel):
    """Provenance of one executed pipeline step."""

    step: str
    config_hash: str
    seed: int
    inputs: list[ArtifactRecord] = Field(default_factory=list)
    outputs: list[ArtifactRecord] = Field(default_factory=list)
    finished_at: str = ""


MANIFEST_DIR = "manifest"


def step_record_path(out_dir: Path, step: str) -> Path:
    """File holding the record of one step (``train-adaptors/g1`` -> ``train-adaptors__g1.json``)."""
    return out_dir / MANIFEST_DIR / f"{step.replace('/', '__')}.json"


class RunManifest(BaseModel):
    """Step records of an output directory, one file per step under ``manifest/``.

    Steps that run in parallel (one ``train-adaptors`` process per
    granularity) each write only their own record, so no entry is lost.

    Notes
    -----
    `finished_at` timestamps are the only non-reproducible values a run
    writes; they live here and nowhere else.
    """

    format_version: int = ARTIFACT_FORMAT_VERSION
    config_hash: str = ""
    steps: dict[str, StepRecord] = Field(default_factory=dict)

    @classmethod
    def load(cls, out_dir: Path) -> RunManifest:
        """Merge every step record of an output directory (empty when none exist).

        ``config_hash`` is the hash recorded by the most recently finished step.
        """
        directory = out_dir / MANIFEST_DIR
        records = [
            StepRecord.model_validate_json(path.read_text(encoding="utf-8"))
            for path in sorted(directory.glob("*.json"))
        ]
        steps = {record.step: record for record in records}
        latest = max(records, key=lambda r: (r.finished_at, r.step), default=None)
        return cls(steps=steps, config_hash=latest.config_hash if latest else "")

    def record_step(
        self,
        out_dir: Path,
        step: str,
        config_hash: str,
        seed: int,
        inputs: list[Path],
        outputs: list[Path],
    ) -> StepRecord:
        """Record a finished step in its own file."""
        record = StepRecord(
            step=step,
            config_hash=config_hash,
            seed=seed,
            inputs=[_record(out_dir, p) for p in inputs],
            outputs=[_record(out_dir, p) for p in outputs],
            finished_at=datetime.now(UTC).isoformat(timespec="microseconds"),
        )
        self.config_hash = config_hash
        self.steps[step] = record
        atomic_write_text(step_record_path(out_dir, step), record.model_dump_json(indent=2))
        logger.info(f"Recorded step {step} with {len(outputs)} output(s)")
        return record


def _record(out_dir: Path, path: Path) -> ArtifactRecord:
    try:
        shown = str(path.relative_to(out_dir))
    except ValueError:
        shown = str(path)
    return ArtifactRecord(path=shown, sha256=sha256_file(path))
