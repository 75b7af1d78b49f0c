"""Retrieval test fixtures."""

from __future__ import annotations

import pytest

from grappa.retrieval import RetrievalReport

from .oracle_table import ORACLE_MAP, ORACLE_RP, make_report


@pytest.fixture
def adaptor_reports() -> list[RetrievalReport]:
    """One report per single-adaptor model."""
    return [
        make_report(f"adaptor_g{i}", rps, ORACLE_MAP.get(i))
        for i, rps in enumerate(ORACLE_RP)
    ]
