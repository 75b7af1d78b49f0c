"""Error handling for the Grappa pipeline."""

from __future__ import annotations

from .exceptions import (
    ConfigError,
    ConfigHashMismatchError,
    GrappaError,
    InvariantViolationError,
    NumericalDivergenceError,
    PrerequisiteMissingError,
    ShapeMismatchError,
)
from .handlers import (
    EXIT_CODES,
    ErrorCategory,
    ErrorContext,
    PipelineErrorHandler,
    get_error_handler,
)

__all__ = [
    "EXIT_CODES",
    "ConfigError",
    "ConfigHashMismatchError",
    "ErrorCategory",
    "ErrorContext",
    "GrappaError",
    "InvariantViolationError",
    "NumericalDivergenceError",
    "PipelineErrorHandler",
    "PrerequisiteMissingError",
    "ShapeMismatchError",
    "get_error_handler",
]
