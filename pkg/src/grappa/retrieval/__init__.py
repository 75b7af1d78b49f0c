"""Leave-one-out retrieval evaluation with R-Precision and MAP@R."""

from __future__ import annotations

from .evaluate import (
    compare_reports,
    embed_task,
    evaluate_embeddings,
    evaluate_model,
    oracle_select,
    score_task,
)
from .metrics import map_at_r, r_precision, rank_gallery, ranked_rows, top_matches, unit_rows
from .models import (
    EvalTask,
    OracleReport,
    OracleTask,
    QueryScore,
    RetrievalReport,
    TaskReport,
)
from .reporting import (
    format_report_table,
    load_report,
    plot_rp_deltas,
    write_query_csv,
    write_report,
)

__all__ = [
    "EvalTask",
    "OracleReport",
    "OracleTask",
    "QueryScore",
    "RetrievalReport",
    "TaskReport",
    "compare_reports",
    "embed_task",
    "evaluate_embeddings",
    "evaluate_model",
    "format_report_table",
    "load_report",
    "map_at_r",
    "oracle_select",
    "plot_rp_deltas",
    "r_precision",
    "rank_gallery",
    "ranked_rows",
    "score_task",
    "top_matches",
    "unit_rows",
    "write_query_csv",
    "write_report",
]
