"""Leave-one-out multi-task retrieval evaluation and the oracle selector."""

from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np
from torch import nn

from ..backbone import encode_images
from ..data import TaskDataset
from ..errors import ConfigError, InvariantViolationError
from ..fusion import GrappaModel
from .metrics import map_at_r, r_precision, ranked_rows, top_matches
from .models import (
    EvalTask,
    OracleReport,
    OracleTask,
    QueryScore,
    RetrievalReport,
    TaskReport,
)

logger = logging.getLogger(__name__)


def embed_task(model: nn.Module, dataset: TaskDataset, batch_size: int = 256) -> EvalTask:
    """Features of every image of one task split."""
    if len(dataset) == 0:
        raise ConfigError(f"Task {dataset.name} has no images", {"task": dataset.name})
    features = encode_images(model, dataset.images, batch_size=batch_size)
    return EvalTask(
        name=dataset.name,
        embeddings=features.cpu().numpy().astype(np.float64),
        labels=np.asarray(dataset.labels),
        ids=dataset.ids,
    )


def score_task(task: EvalTask, keep_queries: bool = True) -> TaskReport:
    """RP and MAP@R of every query of a task, averaged over scored queries.

    Queries whose class has no other member (R = 0) are excluded and counted.

    Raises
    ------
    ConfigError
        If no query of the task can be scored
    """
    labels = task.labels
    _, inverse, counts = np.unique(labels, return_inverse=True, return_counts=True)
    same_class = counts[inverse] - 1

    scores: list[QueryScore] = []
    excluded = 0
    for query, ranking, _ in ranked_rows(task.embeddings):
        r = int(same_class[query])
        relevant = labels[ranking] == labels[query]
        rp = r_precision(relevant, r)
        ap = map_at_r(relevant, r)
        if rp is None or ap is None:
            excluded += 1
            continue
        scores.append(QueryScore(query=task.ids[query], r=r, rp=rp, map_at_r=ap))

    if not scores:
        raise ConfigError(
            f"Task {task.name} has no class with two or more images",
            {"task": task.name, "excluded_queries": excluded},
        )
    if excluded:
        logger.warning(f"Task {task.name}: excluded {excluded} queries with R = 0")

    return TaskReport(
        task=task.name,
        rp=float(np.mean([s.rp for s in scores])),
        map_at_r=float(np.mean([s.map_at_r for s in scores])),
        num_queries=len(scores),
        excluded_queries=excluded,
        queries=scores if keep_queries else [],
    )


def _with_deltas(report: TaskReport, baseline: TaskReport) -> TaskReport:
    return report.model_copy(
        update={
            "rp_delta": report.rp - baseline.rp,
            "map_at_r_delta": report.map_at_r - baseline.map_at_r,
        }
    )


def evaluate_embeddings(
    tasks: Sequence[EvalTask],
    model_name: str,
    baseline: Sequence[EvalTask] | None = None,
    baseline_name: str | None = None,
    keep_queries: bool = True,
) -> RetrievalReport:
    """Score precomputed embeddings, optionally against baseline embeddings."""
    if not tasks:
        raise ConfigError("Evaluation needs at least one task")
    reports = [score_task(task, keep_queries) for task in tasks]

    if baseline is not None:
        if [t.name for t in baseline] != [t.name for t in tasks]:
            raise ConfigError(
                "Baseline tasks do not match evaluated tasks",
                {"tasks": [t.name for t in tasks], "baseline": [t.name for t in baseline]},
            )
        reports = [
            _with_deltas(report, score_task(base, keep_queries=False))
            for report, base in zip(reports, baseline, strict=True)
        ]

    return _aggregate(reports, model_name, baseline_name if baseline is not None else None)


def _aggregate(
    reports: list[TaskReport], model_name: str, baseline_name: str | None
) -> RetrievalReport:
    mean_rp_delta = mean_map_delta = None
    if baseline_name is not None:
        mean_rp_delta = float(np.mean([r.rp_delta or 0.0 for r in reports]))
        mean_map_delta = float(np.mean([r.map_at_r_delta or 0.0 for r in reports]))
    return RetrievalReport(
        model=model_name,
        baseline=baseline_name,
        tasks=reports,
        mean_rp=float(np.mean([r.rp for r in reports])),
        mean_map_at_r=float(np.mean([r.map_at_r for r in reports])),
        mean_rp_delta=mean_rp_delta,
        mean_map_at_r_delta=mean_map_delta,
    )


def compare_reports(report: RetrievalReport, baseline: RetrievalReport) -> RetrievalReport:
    """Add per-task and mean deltas of ``report`` over ``baseline``.

    Raises
    ------
    ConfigError
        If the two reports cover different tasks
    """
    if report.task_names != baseline.task_names:
        raise ConfigError(
            "Baseline report covers different tasks",
            {"tasks": report.task_names, "baseline": baseline.task_names},
        )
    tasks = [
        _with_deltas(task, base) for task, base in zip(report.tasks, baseline.tasks, strict=True)
    ]
    return _aggregate(tasks, report.model, baseline.model)


def evaluate_model(
    model: nn.Module,
    tasks: Sequence[TaskDataset],
    model_name: str = "model",
    baseline: nn.Module | None = None,
    baseline_name: str | None = None,
    batch_size: int = 256,
    keep_queries: bool = True,
    show_queries: int = 0,
) -> RetrievalReport:
    """Evaluate a model on the test split of every task.

    Parameters
    ----------
    model : nn.Module
        Backbone, adapted model or GrappaModel
    tasks : Sequence[TaskDataset]
        Test splits, evaluated independently
    model_name : str, optional
        Name recorded in the report (default: "model")
    baseline : nn.Module | None, optional
        Reference model; per-task deltas are reported against it
    baseline_name : str | None, optional
        Name recorded for the baseline (default: "baseline")
    batch_size : int, optional
        Encoding batch size (default: 256)
    keep_queries : bool, optional
        Keep per-query values in the report (default: True)
    show_queries : int, optional
        Log the top-5 matches of the first ``show_queries`` queries per task

    Returns
    -------
    RetrievalReport
        Per-task means, aggregate means and deltas

    Raises
    ------
    ConfigError
        If no task is given or a task is empty
    """
    if not tasks:
        raise ConfigError("Evaluation needs at least one task")
    for dataset in tasks:
        if len(dataset) == 0:
            raise ConfigError(f"Task {dataset.name} has no images", {"task": dataset.name})
        if dataset.split != "test":
            logger.warning(f"Evaluating on the {dataset.split} split of {dataset.name}")

    reports: list[TaskReport] = []
    for dataset in tasks:
        task = embed_task(model, dataset, batch_size)
        report = score_task(task, keep_queries)
        if baseline is not None:
            base = score_task(embed_task(baseline, dataset, batch_size), keep_queries=False)
            report = _with_deltas(report, base)
        if isinstance(model, GrappaModel) and model.fusion == "attention":
            attention = model.mean_attention(dataset.images, batch_size=batch_size)
            report = report.model_copy(update={"mean_attention": attention.tolist()})
        for query in range(min(show_queries, len(task))):
            _log_matches(task, query)
        logger.info(
            f"{model_name} on {dataset.name}: RP {report.rp:.4f}, MAP@R {report.map_at_r:.4f}"
        )
        reports.append(report)

    name = (baseline_name or "baseline") if baseline is not None else None
    return _aggregate(reports, model_name, name)


def _log_matches(task: EvalTask, query: int) -> None:
    matches = top_matches(query, task.embeddings, k=5)
    listing = ", ".join(
        f"{task.ids[i]}{'*' if task.labels[i] == task.labels[query] else ''} ({s:.3f})"
        for i, s in matches
    )
    logger.info(f"{task.name} query {task.ids[query]}: {listing}")


def oracle_select(reports: Sequence[RetrievalReport]) -> OracleReport:
    """Pick the best single adaptor set per task by RP.

    Ties go to the lower adaptor index. The oracle uses test labels and is a
    reference point, not a deployable model.

    Raises
    ------
    ConfigError
        If no report is given or the task lists differ
    """
    if not reports:
        raise ConfigError("Oracle selection needs at least one report")
    names = reports[0].task_names
    for report in reports[1:]:
        if report.task_names != names:
            raise ConfigError(
                "Oracle inputs cover different tasks",
                {"expected": names, "actual": report.task_names, "model": report.model},
            )

    selected: list[OracleTask] = []
    for index, name in enumerate(names):
        rps = np.array([report.tasks[index].rp for report in reports])
        best = int(np.argmax(rps))
        chosen = reports[best].tasks[index]
        if np.any(rps > chosen.rp):
            raise InvariantViolationError("oracle dominance", f"task {name}")
        selected.append(
            OracleTask(task=name, best_index=best, rp=chosen.rp, map_at_r=chosen.map_at_r)
        )

    return OracleReport(
        candidates=[report.model for report in reports],
        tasks=selected,
        mean_rp=float(np.mean([t.rp for t in selected])),
        mean_map_at_r=float(np.mean([t.map_at_r for t in selected])),
    )
