"""Retrieval evaluation data models and report schema."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, Field

from ..errors import ConfigError, ShapeMismatchError
from ..settings import ARTIFACT_FORMAT_VERSION


@dataclass(frozen=True)
class EvalTask:
    """Test embeddings and class labels of one retrieval task.

    Attributes
    ----------
    name : str
        Task name
    embeddings : np.ndarray
        Features of shape (n, D)
    labels : np.ndarray
        Class label of every image, shape (n,)
    ids : tuple[str, ...]
        Image ids; defaults to the row indices
    """

    name: str
    embeddings: np.ndarray
    labels: np.ndarray
    ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        n = self.embeddings.shape[0]
        if n == 0:
            raise ConfigError(f"Task {self.name} has no images", {"task": self.name})
        if self.embeddings.ndim != 2 or self.labels.shape != (n,):
            raise ShapeMismatchError(
                f"task {self.name}",
                expected="embeddings (n, D) and labels (n,)",
                actual=(self.embeddings.shape, self.labels.shape),
            )
        if not self.ids:
            object.__setattr__(self, "ids", tuple(str(i) for i in range(n)))
        elif len(self.ids) != n:
            raise ShapeMismatchError("ids", expected=n, actual=len(self.ids))

    def __len__(self) -> int:
        return int(self.embeddings.shape[0])


class QueryScore(BaseModel):
    """Metrics of one scored query."""

    query: str
    r: int = Field(description="Same-class gallery items")
    rp: float = Field(ge=0.0, le=1.0)
    map_at_r: float = Field(ge=0.0, le=1.0)


class TaskReport(BaseModel):
    """Per-task means over scored queries."""

    task: str
    rp: float = Field(ge=0.0, le=1.0)
    map_at_r: float = Field(ge=0.0, le=1.0)
    num_queries: int
    excluded_queries: int = Field(default=0, description="Queries with R = 0")
    rp_delta: float | None = None
    map_at_r_delta: float | None = None
    mean_attention: list[float] | None = Field(
        default=None, description="Attention over adaptor sets, averaged over layers and images"
    )
    queries: list[QueryScore] = Field(default_factory=list)


class RetrievalReport(BaseModel):
    """Evaluation of one model on every task."""

    format_version: int = ARTIFACT_FORMAT_VERSION
    model: str
    baseline: str | None = None
    tasks: list[TaskReport]
    mean_rp: float
    mean_map_at_r: float
    mean_rp_delta: float | None = None
    mean_map_at_r_delta: float | None = None

    def task(self, name: str) -> TaskReport:
        for entry in self.tasks:
            if entry.task == name:
                return entry
        raise KeyError(name)

    @property
    def task_names(self) -> list[str]:
        return [entry.task for entry in self.tasks]


class OracleTask(BaseModel):
    """Best single adaptor set for one task."""

    task: str
    best_index: int
    rp: float
    map_at_r: float


class OracleReport(BaseModel):
    """Label-aware per-task selection of the best single adaptor set."""

    format_version: int = ARTIFACT_FORMAT_VERSION
    candidates: list[str]
    tasks: list[OracleTask]
    mean_rp: float
    mean_map_at_r: float
