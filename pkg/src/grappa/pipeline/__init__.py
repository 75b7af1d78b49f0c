"""Three-step pipeline orchestration and its configuration."""

from __future__ import annotations

from .config import (
    AdaptorSection,
    BackboneSection,
    DataSection,
    EvalSection,
    FusionSection,
    PipelineConfig,
    PseudoLabelSection,
    load_config,
)
from .runner import STEPS, PipelineRun, Step, StepResult, load_data, run_step

__all__ = [
    "STEPS",
    "AdaptorSection",
    "BackboneSection",
    "DataSection",
    "EvalSection",
    "FusionSection",
    "PipelineConfig",
    "PipelineRun",
    "PseudoLabelSection",
    "Step",
    "StepResult",
    "load_config",
    "load_data",
    "run_step",
]
