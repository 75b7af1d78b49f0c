"""Tests for step orchestration."""

from __future__ import annotations

import json
import logging

import pytest

from grappa.artifacts import RunManifest
from grappa.errors import ConfigError, ConfigHashMismatchError, PrerequisiteMissingError
from grappa.fusion import load_fusion
from grappa.pipeline import DataSection, PipelineRun, load_data, run_step


class TestPrerequisites:
    """Test that steps refuse to run before their inputs exist."""

    def test_train_adaptors_before_pseudolabels(self, tiny_pipeline_config):
        with pytest.raises(PrerequisiteMissingError) as exc_info:
            run_step("train-adaptors", tiny_pipeline_config)

        assert exc_info.value.step == "pseudolabels"

    def test_train_fusion_before_train_adaptors(self, tiny_pipeline_config):
        with pytest.raises(PrerequisiteMissingError) as exc_info:
            run_step("train-fusion", tiny_pipeline_config, variant="ac")

        assert exc_info.value.step == "train-adaptors"
        assert "adaptors_0.json" in exc_info.value.artifact

    def test_evaluate_without_models(self, tiny_pipeline_config):
        with pytest.raises(PrerequisiteMissingError) as exc_info:
            run_step("evaluate", tiny_pipeline_config)

        assert exc_info.value.step == "train-fusion"

    def test_unknown_granularity(self, tiny_pipeline_config):
        with pytest.raises(ConfigError):
            run_step("train-adaptors", tiny_pipeline_config, granularity=5)

    def test_supervised_avg_rejected(self, tiny_pipeline_config):
        with pytest.raises(ConfigError):
            run_step("train-fusion", tiny_pipeline_config, variant="avg", supervised=True)

    def test_supervised_random_single_rejected(self, tiny_pipeline_config):
        with pytest.raises(ConfigError):
            run_step("train-fusion", tiny_pipeline_config, variant="random_single", supervised=True)

    def test_data_without_source(self, tiny_pipeline_config):
        section = DataSection.model_construct(image_root=None, synthetic=None)

        with pytest.raises(ConfigError):
            load_data(section, tiny_pipeline_config)

    def test_unknown_step(self, tiny_pipeline_config):
        with pytest.raises(ConfigError):
            run_step("deploy", tiny_pipeline_config)  # type: ignore[arg-type]


class TestSteps:
    """Test individual steps and their provenance."""

    def test_pseudolabels(self, tiny_pipeline_config):
        out = tiny_pipeline_config.out_dir

        result = run_step("pseudolabels", tiny_pipeline_config)

        assert {p.name for p in result.outputs} == {
            "pseudolabels_0.npz",
            "pseudolabels_1.npz",
            "dataset_manifest.json",
        }
        assert json.loads((out / "config.json").read_text())["seed"] == 0
        manifest = RunManifest.load(out)
        assert manifest.steps["pseudolabels"].config_hash == tiny_pipeline_config.config_hash()

    def test_pseudolabels_are_reproducible(self, tiny_pipeline_config):
        first = run_step("pseudolabels", tiny_pipeline_config).outputs[0].read_bytes()
        second = run_step("pseudolabels", tiny_pipeline_config).outputs[0].read_bytes()

        assert first == second

    def test_single_granularity(self, tiny_pipeline_config):
        run_step("pseudolabels", tiny_pipeline_config)

        result = run_step("train-adaptors", tiny_pipeline_config, granularity=1)

        assert [p.name for p in result.outputs] == ["adaptors_1.json"]
        assert "train-adaptors/g1" in RunManifest.load(tiny_pipeline_config.out_dir).steps

    def test_random_fusion_needs_no_adaptors(self, tiny_pipeline_config):
        result = run_step("train-fusion", tiny_pipeline_config, variant="random")

        assert [p.name for p in result.outputs] == ["fusion_random.json"]

    def test_random_single_baseline(self, tiny_pipeline_config):
        run = PipelineRun(tiny_pipeline_config)

        result = run.train_fusion("random_single")

        (path,) = result.outputs
        assert path.name == "fusion_random_single.json"
        model = load_fusion(path, run.backbone)
        assert model.num_adaptor_sets == 1
        assert model.fusion == "avg"
        assert model.provenance.variant == "random_single"
        assert "train-fusion/random_single" in RunManifest.load(tiny_pipeline_config.out_dir).steps


class TestConfigHash:
    """Test detection of artifacts from another config."""

    def test_mismatch_warns_by_default(self, tiny_pipeline_config, caplog):
        run_step("pseudolabels", tiny_pipeline_config)

        with caplog.at_level(logging.WARNING):
            run_step("train-adaptors", tiny_pipeline_config.with_overrides(seed=3), granularity=0)

        assert any("config hash" in r.getMessage() for r in caplog.records)

    def test_mismatch_raises_when_strict(self, tiny_pipeline_config, monkeypatch):
        run_step("pseudolabels", tiny_pipeline_config)
        monkeypatch.setenv("GRAPPA_STRICT_CONFIG_HASH", "true")

        with pytest.raises(ConfigHashMismatchError) as exc_info:
            run_step("train-adaptors", tiny_pipeline_config.with_overrides(seed=3))

        assert "pseudolabels" in exc_info.value.artifact


class TestFullRun:
    """Test a complete tiny run."""

    def test_all(self, tiny_pipeline_config):
        out = tiny_pipeline_config.out_dir

        result = run_step("all", tiny_pipeline_config)

        assert set(result.reports) == {
            "backbone",
            "adaptor_g0",
            "adaptor_g1",
            "grappa_avg",
            "grappa_ac",
        }
        assert result.reports["backbone"].baseline is None
        ac = result.reports["grappa_ac"]
        assert ac.baseline == "backbone"
        assert ac.mean_rp_delta == pytest.approx(ac.mean_rp - result.reports["backbone"].mean_rp)
        assert ac.tasks[0].mean_attention is not None
        for name in ("oracle.json", "summary.txt", "grappa_ac.json", "grappa_ac.csv"):
            assert (out / "reports" / name).exists()
        assert not (out / "reports" / "grappa_ac.png").exists()
        steps = RunManifest.load(out).steps
        assert {"pseudolabels", "train-adaptors/g0", "train-fusion/ac", "evaluate"} <= set(steps)

    def test_evaluate_against_checkpoint_baseline(self, tiny_pipeline_config):
        run = PipelineRun(tiny_pipeline_config)
        run.all()
        fusion = run.fusion_dir

        result = run.evaluate(models=[fusion / "fusion_ac.json"], baseline=fusion / "fusion_avg.json")

        assert set(result.reports) == {"grappa_avg", "grappa_ac"}
        assert result.reports["grappa_ac"].baseline == "grappa_avg"

    def test_evaluate_missing_model(self, tiny_pipeline_config, tmp_path):
        with pytest.raises(PrerequisiteMissingError):
            run_step("evaluate", tiny_pipeline_config, models=[tmp_path / "fusion_x.json"])
