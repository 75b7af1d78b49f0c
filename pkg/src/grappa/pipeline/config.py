"""Pipeline configuration loaded from a JSON file.

Every hyper-parameter of a run lives here. The effective configuration,
including command-line overrides, is written verbatim to the output directory
and its SHA-256 (`PipelineConfig.config_hash`) is recorded with every step.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

from pydantic import BaseModel, Field, ValidationError, model_validator

from ..adaptors import AdaptorConfig
from ..artifacts import sha256_json
from ..backbone import BackboneSource
from ..data import SyntheticSpec
from ..errors import ConfigError
from ..fusion import FusionConfig, FusionVariant

logger = logging.getLogger(__name__)


class BackboneSection(BackboneSource):
    """Backbone source plus the feature-extraction batch size."""

    feature_batch_size: int = Field(
        default=256, ge=1, description="Images per batch when extracting features"
    )


class PseudoLabelSection(BaseModel):
    """Step 1: one k-means run per granularity."""

    k_list: list[int] = Field(
        default_factory=lambda: [4, 16, 64],
        min_length=1,
        description="Cluster counts k_1 < ... < k_N, one adaptor set each",
    )
    max_iters: int = Field(default=100, ge=1, description="Lloyd iteration cap")
    tol: float = Field(
        default=1e-4,
        ge=0.0,
        description="Stop once the largest centroid displacement drops below this",
    )
    normalize: bool = Field(default=False, description="L2-normalise features before clustering")

    @model_validator(mode="after")
    def validate_k_list(self) -> PseudoLabelSection:
        """Ensure cluster counts are positive and strictly increasing."""
        if any(k < 1 for k in self.k_list):
            raise ValueError("Cluster counts must be positive")
        if any(a >= b for a, b in zip(self.k_list, self.k_list[1:], strict=False)):
            raise ValueError(f"k_list {self.k_list} must be strictly increasing")
        return self


class AdaptorSection(AdaptorConfig):
    """Step 2 hyper-parameters, shared by every granularity."""


class FusionSection(FusionConfig):
    """Step 3 hyper-parameters plus the variants `all` trains."""

    variants: list[FusionVariant] = Field(
        default_factory=lambda: ["avg", "tc", "ac"],
        min_length=1,
        description="Fusion variants trained by the `all` step",
    )
    supervised: bool = Field(
        default=False, description="Also train label-supervised fusion in the `all` step"
    )


class EvalSection(BaseModel):
    """Retrieval evaluation settings."""

    batch_size: int = Field(default=256, ge=1, description="Images per encoding batch")
    single_adaptors: bool = Field(
        default=True, description="Evaluate every single-adaptor model and the oracle"
    )
    keep_queries: bool = Field(default=True, description="Store per-query values")
    plot: bool = Field(default=True, description="Write RP-delta bar charts when possible")
    show_queries: int = Field(
        default=0, ge=0, description="Log top-5 matches of this many queries per task"
    )


class DataSection(BaseModel):
    """Either the synthetic benchmark or an image-folder root."""

    synthetic: SyntheticSpec | None = Field(default_factory=SyntheticSpec)
    image_root: Path | None = Field(
        default=None, description="Root of <task>/<class>/<image> folders"
    )

    @model_validator(mode="after")
    def validate_source(self) -> DataSection:
        """Exactly one data source; an image root wins over the default benchmark."""
        if self.image_root is not None:
            self.synthetic = None
        if self.synthetic is None and self.image_root is None:
            raise ValueError("Configure either data.synthetic or data.image_root")
        return self


class PipelineConfig(BaseModel):
    """Complete configuration of a Grappa run."""

    seed: int = Field(default=0, description="Seed of k-means, adaptor and fusion training")
    out_dir: Path = Field(default=Path("runs/default"), description="Output directory")
    backbone: BackboneSection = Field(default_factory=BackboneSection)
    pseudolabels: PseudoLabelSection = Field(default_factory=PseudoLabelSection)
    adaptors: AdaptorSection = Field(default_factory=AdaptorSection)
    fusion: FusionSection = Field(default_factory=FusionSection)
    eval: EvalSection = Field(default_factory=EvalSection)
    data: DataSection = Field(default_factory=DataSection)

    @model_validator(mode="after")
    def validate_cross_sections(self) -> PipelineConfig:
        """Check adaptor, neighbour and image sizes against the backbone."""
        dim = self.backbone.config.dim
        bottleneck = self.adaptors.resolve_bottleneck(dim)
        if not 0 < bottleneck < dim:
            raise ValueError(f"Adaptor bottleneck {bottleneck} must be below D = {dim}")
        random_bottleneck = self.fusion.random_bottleneck_dim
        if random_bottleneck is not None and random_bottleneck >= dim:
            raise ValueError(f"Random adaptor bottleneck {random_bottleneck} must be below D = {dim}")
        synthetic = self.data.synthetic
        if synthetic is not None:
            config = self.backbone.config
            if (synthetic.image_size, synthetic.image_size) != (
                config.image_height,
                config.image_width,
            ):
                raise ValueError(
                    f"Synthetic image size {synthetic.image_size} does not match backbone "
                    f"input {config.image_height}x{config.image_width}"
                )
            if config.channels != 3:
                raise ValueError("The synthetic benchmark renders RGB images")
        return self

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form, excluding the output directory."""
        return sha256_json(self.model_dump(mode="json", exclude={"out_dir"}))

    def with_overrides(self, seed: int | None = None, out_dir: Path | None = None) -> PipelineConfig:
        """Copy with command-line overrides applied."""
        update: dict[str, object] = {}
        if seed is not None:
            update["seed"] = seed
        if out_dir is not None:
            update["out_dir"] = out_dir
        return self.model_copy(update=update) if update else self

    def adaptor_config(self) -> AdaptorConfig:
        """Step-2 config seeded from the run seed."""
        return AdaptorConfig.model_validate(
            self.adaptors.model_dump() | {"seed": self.seed}
        )

    def fusion_config(self, variant: FusionVariant | None = None) -> FusionConfig:
        """Step-3 config seeded from the run seed."""
        fields = self.fusion.model_dump(exclude={"variants", "supervised"})
        fields["seed"] = self.seed
        if variant is not None:
            fields["variant"] = variant
        return FusionConfig.model_validate(fields)


def load_config(path: Path | None) -> PipelineConfig:
    """Load a pipeline config from JSON; defaults when ``path`` is None.

    Raises
    ------
    ConfigError
        If the file is missing, not JSON, or fails validation
    """
    if path is None:
        logger.info("No config file given; using defaults")
        return PipelineConfig()
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}", {"path": str(path)})
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}", {"path": str(path)}) from e
    try:
        config = PipelineConfig.model_validate(payload)
    except ValidationError as e:
        raise ConfigError(f"Invalid config {path}: {e}", {"path": str(path)}) from e
    logger.info(f"Loaded config {path} (hash {config.config_hash()[:12]})")
    return config
