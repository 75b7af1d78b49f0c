"""Step orchestration over the output directory.

Output layout::

    <out>/config.json                      effective configuration
    <out>/manifest/<step>.json             step provenance with hashes
    <out>/dataset_manifest.json            per-task image and class counts
    <out>/pseudolabels/pseudolabels_<i>.npz
    <out>/adaptors/adaptors_<i>.json|.bin
    <out>/fusion/fusion_<variant>.json|.bin
    <out>/reports/<model>.json|.csv|.png, oracle.json, summary.txt

Steps only communicate through these files, so each one can run in its own
process once its prerequisites exist.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

from torch import nn

from ..adaptors import (
    AdaptedViT,
    AdaptorSet,
    adaptor_path,
    load_adaptor_set,
    save_adaptor_set,
    train_adaptor_set,
)
from ..artifacts import RunManifest, atomic_write_json, atomic_write_text
from ..backbone import VisionTransformer, load_or_init_backbone
from ..checkpoint import parameters_sha256
from ..data import (
    TaskDataset,
    UnlabeledPool,
    dataset_manifest,
    generate_synthetic_benchmark,
    load_image_folder,
    make_unlabeled_pool,
    select_split,
)
from ..errors import ConfigError, ConfigHashMismatchError, PrerequisiteMissingError
from ..fusion import (
    RANDOM_VARIANTS,
    FusionVariant,
    GrappaModel,
    load_fusion,
    random_adaptor_sets,
    save_fusion,
    train_fusion,
    train_fusion_supervised,
)
from ..pseudolabels import (
    build_granularities,
    extract_feature_store,
    load_pseudolabels,
    pseudolabel_path,
    save_pseudolabels,
)
from ..retrieval import (
    RetrievalReport,
    compare_reports,
    evaluate_model,
    format_report_table,
    oracle_select,
    plot_rp_deltas,
    write_query_csv,
    write_report,
)
from ..settings import get_settings
from .config import DataSection, PipelineConfig

logger = logging.getLogger(__name__)

Step = Literal["pseudolabels", "train-adaptors", "train-fusion", "evaluate", "all"]
STEPS: tuple[Step, ...] = ("pseudolabels", "train-adaptors", "train-fusion", "evaluate", "all")

BACKBONE_BASELINE = "backbone"


@dataclass(frozen=True)
class StepResult:
    """Files written by one executed step."""

    step: str
    outputs: tuple[Path, ...] = ()
    reports: dict[str, RetrievalReport] = field(default_factory=dict)


def load_data(section: DataSection, run: PipelineConfig) -> tuple[list[TaskDataset], UnlabeledPool]:
    """Task datasets (train and test splits) and the unlabeled pool."""
    if section.image_root is not None:
        config = run.backbone.config
        datasets = load_image_folder(section.image_root, config.image_height, config.image_width)
        return datasets, make_unlabeled_pool(select_split(datasets, "train"))
    if section.synthetic is None:
        raise ConfigError("data needs either image_root or a synthetic benchmark")
    return generate_synthetic_benchmark(section.synthetic)


class PipelineRun:
    """One configured run rooted at ``config.out_dir``.

    Backbone and data are built lazily and shared between the steps of an
    ``all`` invocation.
    """

    def __init__(self, config: PipelineConfig) -> None:
        self.config = config
        self.out_dir = config.out_dir
        self.config_hash = config.config_hash()
        self._backbone: VisionTransformer | None = None
        self._data: tuple[list[TaskDataset], UnlabeledPool] | None = None

    # Layout

    @property
    def pseudolabel_dir(self) -> Path:
        return self.out_dir / "pseudolabels"

    @property
    def adaptor_dir(self) -> Path:
        return self.out_dir / "adaptors"

    @property
    def fusion_dir(self) -> Path:
        return self.out_dir / "fusion"

    @property
    def report_dir(self) -> Path:
        return self.out_dir / "reports"

    def fusion_path(self, name: str) -> Path:
        return self.fusion_dir / f"fusion_{name}.json"

    @property
    def granularities(self) -> list[int]:
        return list(range(len(self.config.pseudolabels.k_list)))

    # Shared state

    @property
    def backbone(self) -> VisionTransformer:
        if self._backbone is None:
            self._backbone = load_or_init_backbone(self.config.backbone)
        return self._backbone

    @property
    def datasets(self) -> list[TaskDataset]:
        return self._load_data()[0]

    @property
    def pool(self) -> UnlabeledPool:
        return self._load_data()[1]

    def _load_data(self) -> tuple[list[TaskDataset], UnlabeledPool]:
        if self._data is None:
            self._data = load_data(self.config.data, self.config)
        return self._data

    def _backbone_inputs(self) -> list[Path]:
        checkpoint = self.config.backbone.checkpoint
        return [checkpoint] if checkpoint is not None else []

    # Checks

    def _mismatch(self, artifact: str, expected: str, actual: str) -> None:
        error = ConfigHashMismatchError(artifact, expected, actual)
        if get_settings().strict_config_hash:
            raise error
        logger.warning(f"{error}; continuing because strict_config_hash is off")

    def _check_upstream(self, manifest: RunManifest, steps: Sequence[str]) -> None:
        """Compare the config hash recorded by upstream steps with this run's."""
        for name, record in manifest.steps.items():
            if any(name == s or name.startswith(f"{s}/") for s in steps):
                if record.config_hash != self.config_hash:
                    self._mismatch(f"step {name}", self.config_hash, record.config_hash)

    def _require(self, path: Path, producer: str) -> Path:
        if not path.exists():
            raise PrerequisiteMissingError(str(path), producer)
        return path

    def _begin(self, upstream: Sequence[str]) -> RunManifest:
        manifest = RunManifest.load(self.out_dir)
        self._check_upstream(manifest, upstream)
        atomic_write_json(self.out_dir / "config.json", self.config.model_dump(mode="json"))
        return manifest

    # Step 1

    def pseudolabels(self) -> StepResult:
        """Cluster frozen features of the pool at every granularity."""
        manifest = self._begin(upstream=())
        section = self.config.pseudolabels
        features = extract_feature_store(
            self.backbone, self.pool, batch_size=self.config.backbone.feature_batch_size
        )
        label_sets = build_granularities(
            features.features,
            section.k_list,
            seed=self.config.seed,
            max_iters=section.max_iters,
            tol=section.tol,
            normalize=section.normalize,
            fingerprint=features.fingerprint,
        )
        outputs = [
            save_pseudolabels(pseudolabel_path(self.pseudolabel_dir, labels.index), labels)
            for labels in label_sets
        ]
        manifest_path = self.out_dir / "dataset_manifest.json"
        atomic_write_json(manifest_path, dataset_manifest(self.datasets).model_dump(mode="json"))
        outputs.append(manifest_path)
        manifest.record_step(
            self.out_dir, "pseudolabels", self.config_hash, self.config.seed,
            self._backbone_inputs(), outputs,
        )
        return StepResult("pseudolabels", tuple(outputs))

    # Step 2

    def train_adaptors(self, granularity: int | None = None) -> StepResult:
        """Train one adaptor set per granularity, or only ``granularity``."""
        if granularity is not None and granularity not in self.granularities:
            raise ConfigError(
                f"Granularity {granularity} is not configured; choose from {self.granularities}"
            )
        targets = self.granularities if granularity is None else [granularity]
        step = "train-adaptors"
        inputs = [self._require(pseudolabel_path(self.pseudolabel_dir, g), "pseudolabels") for g in targets]
        manifest = self._begin(upstream=("pseudolabels",))

        fingerprint = parameters_sha256(self.backbone)
        adaptor_config = self.config.adaptor_config()
        outputs: list[Path] = []
        for g, path in zip(targets, inputs, strict=True):
            labels = load_pseudolabels(path)
            if labels.fingerprint and labels.fingerprint != fingerprint:
                self._mismatch(f"{path} backbone fingerprint", fingerprint, labels.fingerprint)
            adaptors = train_adaptor_set(self.backbone, self.pool, labels, adaptor_config)
            out = save_adaptor_set(adaptor_path(self.adaptor_dir, g), adaptors)
            outputs.append(out)
            manifest.record_step(
                self.out_dir, f"{step}/g{g}", self.config_hash, self.config.seed,
                [*self._backbone_inputs(), path], [out],
            )
        return StepResult(step, tuple(outputs))

    def _load_adaptor_sets(self) -> tuple[list[AdaptorSet], list[Path]]:
        paths = [
            self._require(adaptor_path(self.adaptor_dir, g), "train-adaptors")
            for g in self.granularities
        ]
        return [load_adaptor_set(p) for p in paths], paths

    # Step 3

    def train_fusion(self, variant: FusionVariant, supervised: bool = False) -> StepResult:
        """Train (or, for ``avg``, just assemble) the fused model and save it."""
        step = "train-fusion"
        name = "supervised" if supervised else variant
        if supervised and variant in ("avg", "random_single"):
            raise ConfigError(
                f"Supervised fusion needs attention; use a variant other than {variant}"
            )
        fusion_config = self.config.fusion_config(variant)

        inputs: list[Path] = []
        random_baseline = variant in RANDOM_VARIANTS and not supervised
        if random_baseline:
            count = 1 if variant == "random_single" else len(self.granularities)
            sets = random_adaptor_sets(self.backbone, count, fusion_config)
        else:
            sets, inputs = self._load_adaptor_sets()
        manifest = self._begin(upstream=("pseudolabels", "train-adaptors"))

        model = GrappaModel(
            self.backbone,
            sets,
            fusion="avg" if variant in ("avg", "random_single") else "attention",
            include_class_token=fusion_config.include_class_token,
            scale_logits=fusion_config.scale_logits,
        )
        if supervised:
            model = train_fusion_supervised(
                model, select_split(self.datasets, "train"), fusion_config
            )
        else:
            model = train_fusion(model, self.pool, variant, fusion_config)
        out = save_fusion(self.fusion_path(name), model, finetuned_adaptors=random_baseline)
        manifest.record_step(
            self.out_dir, f"{step}/{name}", self.config_hash, self.config.seed,
            [*self._backbone_inputs(), *inputs], [out],
        )
        return StepResult(step, (out,))

    # Evaluation

    def _load_model(self, path: Path) -> GrappaModel:
        sets: list[AdaptorSet] | None = None
        if all(adaptor_path(self.adaptor_dir, g).exists() for g in self.granularities):
            sets = [load_adaptor_set(adaptor_path(self.adaptor_dir, g)) for g in self.granularities]
        return load_fusion(path, self.backbone, sets)

    @staticmethod
    def _model_name(path: Path) -> str:
        return "grappa_" + path.stem.removeprefix("fusion_")

    def _write_report(self, report: RetrievalReport) -> list[Path]:
        stem = self.report_dir / report.model
        outputs = [write_report(stem.with_suffix(".json"), report)]
        if self.config.eval.keep_queries:
            outputs.append(write_query_csv(stem.with_suffix(".csv"), report))
        if self.config.eval.plot:
            chart = plot_rp_deltas(stem.with_suffix(".png"), report)
            if chart is not None:
                outputs.append(chart)
        return outputs

    def evaluate(
        self,
        models: Sequence[Path] | None = None,
        baseline: Path | None = None,
        show_queries: int | None = None,
    ) -> StepResult:
        """Score every trained model against the frozen backbone or ``baseline``.

        Without ``models`` every fusion checkpoint of the run is evaluated,
        plus each single-adaptor model and the oracle over them.
        """
        step = "evaluate"
        section = self.config.eval
        shown = section.show_queries if show_queries is None else show_queries
        fusion_paths = (
            [self._require(p, "train-fusion") for p in models]
            if models
            else sorted(self.fusion_dir.glob("fusion_*.json"))
        )
        single = not models and section.single_adaptors
        adaptor_paths = [adaptor_path(self.adaptor_dir, g) for g in self.granularities]
        single = single and all(p.exists() for p in adaptor_paths)
        if not fusion_paths and not single:
            raise PrerequisiteMissingError(str(self.fusion_path("<variant>")), "train-fusion")
        manifest = self._begin(upstream=("pseudolabels", "train-adaptors", "train-fusion"))
        tests = select_split(self.datasets, "test")

        def run(model: nn.Module, name: str) -> RetrievalReport:
            return evaluate_model(
                model, tests, model_name=name, batch_size=section.batch_size,
                keep_queries=section.keep_queries, show_queries=shown,
            )

        if baseline is not None:
            reference = run(self._load_model(self._require(baseline, "train-fusion")), self._model_name(baseline))
        else:
            reference = run(self.backbone, BACKBONE_BASELINE)
        single_reports: list[RetrievalReport] = []
        if single:
            for path in adaptor_paths:
                adaptors = load_adaptor_set(path)
                report = run(AdaptedViT(self.backbone, adaptors), f"adaptor_g{adaptors.granularity}")
                single_reports.append(compare_reports(report, reference))
        fused_reports = [
            compare_reports(run(self._load_model(path), self._model_name(path)), reference)
            for path in fusion_paths
        ]

        reports = {r.model: r for r in [reference, *single_reports, *fused_reports]}
        outputs: list[Path] = []
        for report in reports.values():
            outputs.extend(self._write_report(report))

        summary = [format_report_table(report) for report in reports.values()]
        if single_reports:
            oracle = oracle_select(single_reports)
            outputs.append(write_report(self.report_dir / "oracle.json", oracle))
            summary.append(
                "oracle: "
                + ", ".join(f"{t.task}->g{t.best_index} ({100 * t.rp:.1f})" for t in oracle.tasks)
            )
        summary_path = self.report_dir / "summary.txt"
        atomic_write_text(summary_path, "\n\n".join(summary) + "\n")
        outputs.append(summary_path)
        logger.info(f"Evaluation summary:\n{summary_path.read_text(encoding='utf-8')}")

        inputs = [*self._backbone_inputs(), *fusion_paths]
        if single:
            inputs.extend(adaptor_paths)
        manifest.record_step(self.out_dir, step, self.config_hash, self.config.seed, inputs, outputs)
        return StepResult(step, tuple(outputs), reports)

    def all(self) -> StepResult:
        """Every step in order with the configured fusion variants."""
        outputs: list[Path] = []
        outputs.extend(self.pseudolabels().outputs)
        outputs.extend(self.train_adaptors().outputs)
        for variant in self.config.fusion.variants:
            outputs.extend(self.train_fusion(variant).outputs)
        if self.config.fusion.supervised:
            outputs.extend(self.train_fusion("ac", supervised=True).outputs)
        result = self.evaluate()
        outputs.extend(result.outputs)
        return StepResult("all", tuple(outputs), result.reports)


def run_step(
    step: Step,
    config: PipelineConfig,
    granularity: int | None = None,
    variant: FusionVariant | None = None,
    supervised: bool = False,
    models: Sequence[Path] | None = None,
    baseline: Path | None = None,
    show_queries: int | None = None,
) -> StepResult:
    """Run one pipeline step (or ``all``) for a configuration.

    Parameters
    ----------
    step : Step
        ``pseudolabels``, ``train-adaptors``, ``train-fusion``, ``evaluate`` or ``all``
    config : PipelineConfig
        Effective configuration, overrides applied
    granularity : int | None, optional
        Train only this adaptor set (``train-adaptors``)
    variant : FusionVariant | None, optional
        Fusion variant (``train-fusion``); the configured one when unset
    supervised : bool, optional
        Train label-supervised fusion instead (``train-fusion``)
    models : Sequence[Path] | None, optional
        Fusion checkpoints to evaluate; all of the run when unset
    baseline : Path | None, optional
        Fusion checkpoint used as baseline; the frozen backbone when unset
    show_queries : int | None, optional
        Log top-5 matches of this many queries per task (``evaluate``)

    Returns
    -------
    StepResult
        Paths written by the step

    Raises
    ------
    PrerequisiteMissingError
        If an upstream artifact is missing
    ConfigHashMismatchError
        If upstream artifacts came from another config and strictness is on
    """
    if step not in STEPS:
        raise ConfigError(f"Unknown step {step!r}; choose from {', '.join(STEPS)}")
    run = PipelineRun(config)
    logger.info(f"Running {step} into {config.out_dir} (config {run.config_hash[:12]})")
    if step == "pseudolabels":
        return run.pseudolabels()
    if step == "train-adaptors":
        return run.train_adaptors(granularity)
    if step == "train-fusion":
        return run.train_fusion(variant or config.fusion.variant, supervised=supervised)
    if step == "evaluate":
        return run.evaluate(models, baseline, show_queries)
    return run.all()
