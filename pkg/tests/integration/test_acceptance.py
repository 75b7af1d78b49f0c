"""End-to-end checks on the synthetic multi-granularity benchmark."""

from __future__ import annotations

from pathlib import Path

import pytest

from grappa.checkpoint import load_archive
from grappa.pipeline import PipelineConfig, load_config, run_step
from grappa.retrieval import oracle_select

SYNTHETIC_CONFIG = Path(__file__).resolve().parents[2] / "configs" / "synthetic.json"
TASKS = ["task0_coarse", "task1_mid", "task2_fine"]


@pytest.fixture(scope="module")
def shipped_run(tmp_path_factory):
    """One full run of the shipped synthetic config (k = 4, 16, 64)."""
    config = load_config(SYNTHETIC_CONFIG)
    config = config.model_copy(
        update={
            "out_dir": tmp_path_factory.mktemp("synthetic") / "run",
            "eval": config.eval.model_copy(update={"plot": False}),
        }
    )
    return config, run_step("all", config).reports


@pytest.fixture
def small_config(tmp_path):
    """Small but trainable run over coarse, mid and fine tasks."""
    return PipelineConfig.model_validate(
        {
            "seed": 0,
            "out_dir": str(tmp_path / "run"),
            "backbone": {
                "config": {
                    "image_height": 32,
                    "image_width": 32,
                    "patch_size": 8,
                    "num_layers": 2,
                    "dim": 32,
                    "num_heads": 4,
                    "mlp_hidden_dim": 64,
                },
            },
            "pseudolabels": {"k_list": [4, 16]},
            "adaptors": {"bottleneck_dim": 8, "epochs": 3, "batch_size": 32},
            "fusion": {"epochs": 2, "batch_size": 32, "variants": ["avg", "tc", "ac"]},
            "eval": {"plot": False, "keep_queries": False},
            "data": {
                "synthetic": {
                    "num_shapes": 4,
                    "colors_per_shape": 2,
                    "textures_per_color": 2,
                    "images_per_class": 10,
                    "image_size": 32,
                }
            },
        }
    )


@pytest.mark.slow
class TestShippedSyntheticRun:
    """Directional results of the shipped synthetic config."""

    def test_reports(self, shipped_run):
        config, reports = shipped_run

        assert config.pseudolabels.k_list == [4, 16, 64]
        assert set(reports) == {
            "backbone",
            "adaptor_g0",
            "adaptor_g1",
            "adaptor_g2",
            "grappa_avg",
            "grappa_tc",
            "grappa_ac",
        }
        for report in reports.values():
            assert report.task_names == TASKS
            for task in report.tasks:
                assert 0.0 <= task.map_at_r <= task.rp <= 1.0

    @pytest.mark.parametrize("task", TASKS)
    def test_some_adaptor_beats_backbone(self, shipped_run, task):
        _, reports = shipped_run
        baseline = reports["backbone"].task(task).rp

        best = max(reports[f"adaptor_g{g}"].task(task).rp for g in range(3))

        assert best > baseline

    @pytest.mark.parametrize("model", ["grappa_avg", "grappa_ac"])
    def test_fusion_not_below_backbone(self, shipped_run, model):
        _, reports = shipped_run

        assert reports[model].mean_rp >= reports["backbone"].mean_rp

    def test_oracle_is_best_adaptor_per_task(self, shipped_run):
        _, reports = shipped_run
        singles = [reports[f"adaptor_g{g}"] for g in range(3)]

        oracle = oracle_select(singles)

        for entry in oracle.tasks:
            assert entry.rp == max(r.task(entry.task).rp for r in singles)

    def test_ac_attention_sharpens(self, shipped_run):
        config, _ = shipped_run
        path = config.out_dir / "fusion" / "fusion_ac.json"

        history = load_archive(path, expected_kind="fusion").metadata["provenance"][
            "entropy_history"
        ]

        assert history[-1] < history[0] - 1e-3


@pytest.mark.slow
class TestSmallSyntheticRun:
    """Structure and determinism on a smaller config."""

    def test_oracle_dominates_single_adaptors(self, small_config):
        result = run_step("all", small_config)
        oracle_path = small_config.out_dir / "reports" / "oracle.json"

        assert oracle_path.exists()
        singles = [result.reports["adaptor_g0"], result.reports["adaptor_g1"]]

        assert oracle_select(singles).mean_rp >= max(r.mean_rp for r in singles)

    def test_rerun_reproduces_reports(self, small_config, tmp_path):
        first = run_step("all", small_config).reports
        again = run_step("all", small_config.with_overrides(out_dir=tmp_path / "again")).reports

        assert {k: v.model_dump() for k, v in first.items()} == {
            k: v.model_dump() for k, v in again.items()
        }
