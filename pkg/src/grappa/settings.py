"""Process-level settings for Grappa.

This module manages environment variables that affect every pipeline step
(logging, threading, strictness). Per-run hyper-parameters live in
`grappa.pipeline.config.PipelineConfig` and are loaded from a config file.
"""

from __future__ import annotations

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

# Version of the on-disk artifact layout (checkpoints, pseudo-labels, reports)
ARTIFACT_FORMAT_VERSION = 1

# Relative slack allowed when asserting that Lloyd inertia does not increase
INERTIA_RELATIVE_SLACK = 1e-9


class Settings(BaseSettings):
    """Application settings with environment variable support."""

    # Logging
    log_level: str = Field(
        default="INFO",
        pattern="^(DEBUG|INFO|WARNING|ERROR|CRITICAL)$",
        description="Logging level",
    )

    # Execution
    num_threads: int = Field(
        default=1,
        ge=1,
        le=256,
        description="Torch intra-op threads (1 keeps runs bit-deterministic)",
    )

    # Pipeline strictness
    strict_config_hash: bool = Field(
        default=False,
        description=(
            "Treat a config-hash mismatch between pipeline steps as an error "
            "instead of a warning"
        ),
    )
    check_invariants: bool = Field(
        default=True,
        description=(
            "Assert attention normalisation and Lloyd monotonicity at runtime"
        ),
    )

    model_config = SettingsConfigDict(
        env_prefix="GRAPPA_",
        case_sensitive=False,
        validate_assignment=True,
    )


# Global settings instance
_settings: Settings | None = None


def get_settings() -> Settings:
    """Get the global settings instance.

    Returns
    -------
    Settings
        The configured settings instance
    """
    global _settings
    if _settings is None:
        _settings = Settings()
    return _settings


def reload_settings() -> Settings:
    """Reload settings from environment variables.

    Returns
    -------
    Settings
        The reloaded settings instance
    """
    global _settings
    _settings = None
    return get_settings()
