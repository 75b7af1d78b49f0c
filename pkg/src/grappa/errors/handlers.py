"""Error categories, exit codes and user-facing guidance for the CLI."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any

from .exceptions import (
    ConfigError,
    GrappaError,
    NumericalDivergenceError,
    PrerequisiteMissingError,
)


class ErrorCategory(Enum):
    """Categories of errors that can end a pipeline step."""

    CONFIG_ERROR = "config_error"
    PREREQUISITE_MISSING = "prerequisite_missing"
    NUMERIC_DIVERGENCE = "numeric_divergence"
    UNKNOWN_ERROR = "unknown_error"


EXIT_CODES: dict[ErrorCategory, int] = {
    ErrorCategory.CONFIG_ERROR: 2,
    ErrorCategory.PREREQUISITE_MISSING: 3,
    ErrorCategory.NUMERIC_DIVERGENCE: 4,
    ErrorCategory.UNKNOWN_ERROR: 1,
}


@dataclass
class ErrorContext:
    """Context information for errors."""

    category: ErrorCategory
    original_error: str = ""
    step: str | None = None
    additional_info: dict[str, Any] | None = None


class PipelineErrorHandler:
    """Turns pipeline exceptions into exit codes and actionable messages."""

    def __init__(self) -> None:
        """Initialize the error handler."""
        self._error_messages = self._build_error_messages()

    def _build_error_messages(self) -> dict[ErrorCategory, dict[str, str]]:
        """Build error message mappings."""
        return {
            ErrorCategory.CONFIG_ERROR: {
                "message": "Invalid configuration",
                "guidance": "Check the config file against `grappa show-config` and fix the reported field.",
            },
            ErrorCategory.PREREQUISITE_MISSING: {
                "message": "A required artifact is missing",
                "guidance": "Run the pipeline steps in order: pseudolabels, train-adaptors, train-fusion, evaluate.",
            },
            ErrorCategory.NUMERIC_DIVERGENCE: {
                "message": "Training diverged (NaN or Inf encountered)",
                "guidance": "Lower the learning rate or check the input data for non-finite values.",
            },
            ErrorCategory.UNKNOWN_ERROR: {
                "message": "Unexpected error",
                "guidance": "Re-run with GRAPPA_LOG_LEVEL=DEBUG for details.",
            },
        }

    @staticmethod
    def categorize(error: BaseException) -> ErrorCategory:
        """Map an exception onto its error category.

        Parameters
        ----------
        error : BaseException
            Exception raised by a pipeline step

        Returns
        -------
        ErrorCategory
            Category determining message and exit code
        """
        if isinstance(error, PrerequisiteMissingError):
            return ErrorCategory.PREREQUISITE_MISSING
        if isinstance(error, NumericalDivergenceError):
            return ErrorCategory.NUMERIC_DIVERGENCE
        if isinstance(error, ConfigError):
            return ErrorCategory.CONFIG_ERROR
        # pydantic validation errors surface from config loading
        if type(error).__name__ == "ValidationError":
            return ErrorCategory.CONFIG_ERROR
        return ErrorCategory.UNKNOWN_ERROR

    def context_for(self, error: BaseException, step: str | None = None) -> ErrorContext:
        """Build an ErrorContext from an exception."""
        info = error.context if isinstance(error, GrappaError) else None
        return ErrorContext(
            category=self.categorize(error),
            original_error=str(error),
            step=step,
            additional_info=info,
        )

    def handle_error(self, context: ErrorContext) -> dict[str, str]:
        """Return a user-facing message with guidance.

        Parameters
        ----------
        context : ErrorContext
            Error context information

        Returns
        -------
        dict[str, str]
            Dictionary with 'message', 'guidance' and 'technical' fields
        """
        error_info = dict(self._error_messages[context.category])
        error_info["technical"] = context.original_error
        if context.category == ErrorCategory.PREREQUISITE_MISSING and context.additional_info:
            producer = context.additional_info.get("step")
            if producer:
                error_info["guidance"] = f"Run `grappa {producer}` before this step."
        return error_info

    def exit_code(self, context: ErrorContext) -> int:
        """Exit code for an error context."""
        return EXIT_CODES[context.category]

    def format_error_message(
        self, error_info: dict[str, str], include_technical: bool = True
    ) -> str:
        """Format error information into a message for stderr.

        Parameters
        ----------
        error_info : dict[str, str]
            Error information from handle_error
        include_technical : bool
            Whether to include technical details

        Returns
        -------
        str
            Formatted error message
        """
        parts = [f"Error: {error_info['message']}"]
        if include_technical and error_info.get("technical"):
            parts.append(f"  {error_info['technical']}")
        if error_info.get("guidance"):
            parts.append(f"Hint: {error_info['guidance']}")
        return "\n".join(parts)


# Global error handler instance
_error_handler: PipelineErrorHandler | None = None


def get_error_handler() -> PipelineErrorHandler:
    """Get the global error handler instance.

    Returns
    -------
    PipelineErrorHandler
        Global error handler instance
    """
    global _error_handler
    if _error_handler is None:
        _error_handler = PipelineErrorHandler()
    return _error_handler
