"""Main module entry point for Grappa.

Provides one CLI command per pipeline step plus `all` and `show-config`.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path
from typing import Annotated, get_args

import torch
import typer

from .errors import GrappaError, get_error_handler
from .fusion import FusionVariant
from .pipeline import PipelineConfig, Step, load_config, run_step
from .settings import get_settings

app = typer.Typer(
    name="grappa",
    help="Grappa - unsupervised multi-task adaptation of a frozen vision transformer",
    add_completion=False,
)

logger = logging.getLogger("grappa")

ConfigOption = Annotated[
    Path | None,
    typer.Option("--config", "-c", help="Pipeline config JSON file (defaults when omitted)"),
]
SeedOption = Annotated[
    int | None, typer.Option("--seed", help="Override the run seed")
]
OutOption = Annotated[
    Path | None, typer.Option("--out", "-o", help="Override the output directory")
]


def _setup() -> None:
    settings = get_settings()
    logging.basicConfig(
        level=getattr(logging, settings.log_level),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )
    torch.set_num_threads(settings.num_threads)


def _effective_config(config: Path | None, seed: int | None, out: Path | None) -> PipelineConfig:
    return load_config(config).with_overrides(seed=seed, out_dir=out)


def _run(step: Step, config: Path | None, seed: int | None, out: Path | None, **kwargs: object) -> None:
    """Run a step and turn pipeline errors into exit codes."""
    _setup()
    handler = get_error_handler()
    try:
        result = run_step(step, _effective_config(config, seed, out), **kwargs)  # type: ignore[arg-type]
    except GrappaError as e:
        context = handler.context_for(e, step=step)
        typer.echo(handler.format_error_message(handler.handle_error(context)), err=True)
        raise typer.Exit(code=handler.exit_code(context)) from e
    except Exception as e:
        logger.exception(f"Unexpected error in {step}")
        context = handler.context_for(e, step=step)
        typer.echo(handler.format_error_message(handler.handle_error(context)), err=True)
        raise typer.Exit(code=handler.exit_code(context)) from e
    typer.echo(f"{step}: wrote {len(result.outputs)} file(s)")


@app.command()
def pseudolabels(config: ConfigOption = None, seed: SeedOption = None, out: OutOption = None) -> None:
    """Step 1: cluster frozen features into multi-granularity pseudo-labels."""
    _run("pseudolabels", config, seed, out)


@app.command("train-adaptors")
def train_adaptors(
    config: ConfigOption = None,
    seed: SeedOption = None,
    out: OutOption = None,
    granularity: Annotated[
        int | None,
        typer.Option("--granularity", "-g", help="Train only this granularity index"),
    ] = None,
    all_granularities: Annotated[
        bool, typer.Option("--all", help="Train every granularity (default)")
    ] = False,
) -> None:
    """Step 2: train one adaptor set per pseudo-label granularity."""
    if granularity is not None and all_granularities:
        typer.echo("Error: --granularity and --all are mutually exclusive", err=True)
        raise typer.Exit(code=2)
    _run("train-adaptors", config, seed, out, granularity=granularity)


@app.command("train-fusion")
def train_fusion(
    config: ConfigOption = None,
    seed: SeedOption = None,
    out: OutOption = None,
    variant: Annotated[
        str | None,
        typer.Option(
            "--variant",
            help="avg, tc, ac, random or random_single (config value when omitted)",
        ),
    ] = None,
    supervised: Annotated[
        bool, typer.Option("--supervised", help="Train fusion with class labels instead")
    ] = False,
) -> None:
    """Step 3: train the attention fusion over the adaptor sets."""
    valid: tuple[FusionVariant, ...] = get_args(FusionVariant)
    if variant is not None and variant not in valid:
        typer.echo(
            f"Error: Invalid variant '{variant}'. Valid variants: {', '.join(valid)}",
            err=True,
        )
        raise typer.Exit(code=2)
    _run("train-fusion", config, seed, out, variant=variant, supervised=supervised)


@app.command()
def evaluate(
    config: ConfigOption = None,
    seed: SeedOption = None,
    out: OutOption = None,
    model: Annotated[
        list[Path] | None,
        typer.Option("--model", "-m", help="Fusion checkpoint(s); all of the run when omitted"),
    ] = None,
    baseline: Annotated[
        Path | None,
        typer.Option("--baseline", help="Fusion checkpoint to compare against (frozen backbone by default)"),
    ] = None,
    show_queries: Annotated[
        int | None,
        typer.Option("--show-queries", min=0, help="Log top-5 matches of this many queries per task"),
    ] = None,
) -> None:
    """Leave-one-out retrieval evaluation with RP and MAP@R."""
    _run(
        "evaluate", config, seed, out,
        models=model or None, baseline=baseline, show_queries=show_queries,
    )


@app.command("all")
def run_all(config: ConfigOption = None, seed: SeedOption = None, out: OutOption = None) -> None:
    """Run every step in order."""
    _run("all", config, seed, out)


@app.command("show-config")
def show_config(config: ConfigOption = None, seed: SeedOption = None, out: OutOption = None) -> None:
    """Print the effective configuration and its hash."""
    handler = get_error_handler()
    try:
        effective = _effective_config(config, seed, out)
    except GrappaError as e:
        context = handler.context_for(e, step="show-config")
        typer.echo(handler.format_error_message(handler.handle_error(context)), err=True)
        raise typer.Exit(code=handler.exit_code(context)) from e
    typer.echo(json.dumps(effective.model_dump(mode="json"), indent=2, sort_keys=True))
    typer.echo(f"config_hash: {effective.config_hash()}")


def main() -> None:
    """CLI entry point."""
    app()


if __name__ == "__main__":
    main()
