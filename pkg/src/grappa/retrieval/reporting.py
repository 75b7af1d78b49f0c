"""Report files: JSON report, per-query CSV, text table and RP-delta chart."""

from __future__ import annotations

import csv
import io
import json
import logging
from pathlib import Path

from ..artifacts import atomic_write_bytes, atomic_write_json, atomic_write_text
from ..errors import ConfigError
from .models import OracleReport, RetrievalReport

logger = logging.getLogger(__name__)

QUERY_CSV_FIELDS = ["task", "query", "r", "rp", "map_at_r"]


def write_report(path: Path, report: RetrievalReport | OracleReport) -> Path:
    """Write a report as sorted-key JSON."""
    atomic_write_json(path, report.model_dump(mode="json"))
    logger.info(f"Wrote report {path}")
    return path


def load_report(path: Path) -> RetrievalReport:
    if not path.exists():
        raise ConfigError(f"Report not found: {path}", {"path": str(path)})
    return RetrievalReport.model_validate(json.loads(path.read_text(encoding="utf-8")))


def write_query_csv(path: Path, report: RetrievalReport) -> Path:
    """Write one row per scored query."""
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=QUERY_CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for task in report.tasks:
        for score in task.queries:
            writer.writerow(
                {
                    "task": task.task,
                    "query": score.query,
                    "r": score.r,
                    "rp": repr(score.rp),
                    "map_at_r": repr(score.map_at_r),
                }
            )
    atomic_write_text(path, buffer.getvalue())
    logger.info(f"Wrote per-query values {path}")
    return path


def format_report_table(report: RetrievalReport) -> str:
    """Percent table of per-task RP and MAP@R with deltas when present."""
    with_delta = report.baseline is not None
    header = f"{'task':<24}{'RP':>8}{'MAP@R':>8}"
    if with_delta:
        header += f"{'dRP':>8}{'dMAP@R':>8}"
    lines = [f"{report.model}" + (f" vs {report.baseline}" if with_delta else ""), header]
    for task in report.tasks:
        line = f"{task.task:<24}{100 * task.rp:>8.1f}{100 * task.map_at_r:>8.1f}"
        if with_delta:
            line += f"{100 * (task.rp_delta or 0.0):>+8.1f}{100 * (task.map_at_r_delta or 0.0):>+8.1f}"
        lines.append(line)
    mean = f"{'mean':<24}{100 * report.mean_rp:>8.1f}{100 * report.mean_map_at_r:>8.1f}"
    if with_delta:
        mean += (
            f"{100 * (report.mean_rp_delta or 0.0):>+8.1f}"
            f"{100 * (report.mean_map_at_r_delta or 0.0):>+8.1f}"
        )
    lines.append(mean)
    return "\n".join(lines)


def plot_rp_deltas(path: Path, report: RetrievalReport) -> Path | None:
    """Bar chart of per-task RP gains over the baseline.

    Returns None when the report has no baseline or matplotlib is missing.
    """
    if report.baseline is None:
        return None
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        logger.warning("matplotlib is not installed; skipping the RP delta chart")
        return None

    names = report.task_names
    deltas = [100 * (task.rp_delta or 0.0) for task in report.tasks]
    fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(names)), 3.5))
    ax.bar(names, deltas, color=["tab:green" if d >= 0 else "tab:red" for d in deltas])
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_ylabel(f"RP gain rel. to {report.baseline} (points)")
    ax.set_title(report.model)
    fig.tight_layout()
    buffer = io.BytesIO()
    # Fixed metadata keeps the PNG bytes stable across runs
    fig.savefig(buffer, format="png", metadata={"Software": None})
    plt.close(fig)
    atomic_write_bytes(path, buffer.getvalue())
    logger.info(f"Wrote RP delta chart {path}")
    return path
