"""Exception hierarchy for the Grappa pipeline."""

from __future__ import annotations

from typing import Any


class GrappaError(Exception):
    """Base exception for Grappa errors with structured context.

    Parameters
    ----------
    message : str
        Error message
    context : dict[str, Any] | None, optional
        Additional context used by the error handler (default: None)
    """

    def __init__(self, message: str, context: dict[str, Any] | None = None) -> None:
        super().__init__(message)
        self.context = context or {}


class ConfigError(GrappaError):
    """Raised when a configuration or an argument is invalid."""


class ShapeMismatchError(ConfigError):
    """Raised when tensor shapes or dimensions are incompatible.

    Examples
    --------
    >>> raise ShapeMismatchError("pos_embed", expected=(17, 64), actual=(17, 32))
    ShapeMismatchError: pos_embed: expected shape (17, 64), got (17, 32)
    """

    def __init__(
        self,
        what: str,
        expected: Any = None,
        actual: Any = None,
        message: str | None = None,
    ) -> None:
        self.what = what
        self.expected = expected
        self.actual = actual
        if message is None:
            message = f"{what}: expected shape {expected}, got {actual}"
        super().__init__(
            message, {"what": what, "expected": expected, "actual": actual}
        )


class ConfigHashMismatchError(ConfigError):
    """Raised when an upstream artifact was produced from a different config."""

    def __init__(self, artifact: str, expected: str, actual: str) -> None:
        self.artifact = artifact
        super().__init__(
            f"Artifact {artifact} was produced with config hash {actual[:12]}, "
            f"current config hash is {expected[:12]}",
            {"artifact": artifact, "expected": expected, "actual": actual},
        )


class PrerequisiteMissingError(GrappaError):
    """Raised when a pipeline step runs before the artifacts it depends on exist.

    Parameters
    ----------
    artifact : str
        Path or name of the missing artifact
    step : str
        Step that produces the missing artifact
    """

    def __init__(self, artifact: str, step: str) -> None:
        self.artifact = artifact
        self.step = step
        super().__init__(
            f"Missing artifact {artifact}; run `grappa {step}` first",
            {"artifact": artifact, "step": step},
        )


class NumericalDivergenceError(GrappaError):
    """Raised when activations or a loss become NaN or infinite.

    Parameters
    ----------
    where : str
        Component that produced the non-finite value
    layer_index : int | None, optional
        Transformer layer index, when relevant
    epoch : int | None, optional
        Training epoch, when relevant
    """

    def __init__(
        self,
        where: str,
        layer_index: int | None = None,
        epoch: int | None = None,
    ) -> None:
        self.where = where
        self.layer_index = layer_index
        self.epoch = epoch
        msg = f"Non-finite values in {where}"
        if layer_index is not None:
            msg += f" at layer {layer_index}"
        if epoch is not None:
            msg += f" (epoch {epoch})"
        super().__init__(msg, {"layer_index": layer_index, "epoch": epoch})


class InvariantViolationError(GrappaError):
    """Raised when a runtime invariant check fails.

    Examples are a Lloyd iteration that increases inertia or attention weights
    that do not sum to one. These checks run when
    ``Settings.check_invariants`` is enabled.
    """

    def __init__(self, invariant: str, detail: str) -> None:
        self.invariant = invariant
        super().__init__(f"{invariant} violated: {detail}", {"invariant": invariant})
