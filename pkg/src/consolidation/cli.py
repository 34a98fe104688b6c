"""Command-line orchestrator.

Exit codes: 0 success, 2 config error, 3 dependency error, 4 provider
error, 5 budget/length error, 1 anything else.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from .config import load_config
from .errors import (
    BudgetError,
    ConfigError,
    DependencyError,
    EngineError,
    LengthError,
    ProviderError,
)
from .runner import Run

EXIT_CODES = [
    (ConfigError, 2),
    (DependencyError, 3),
    (ProviderError, 4),
    (BudgetError, 5),
    (LengthError, 5),
    (EngineError, 1),
]


def _run_stage(fn, *args) -> None:
    try:
        changed = fn(*args)
        if changed is False:
            click.echo("already complete")
    except EngineError as e:
        for exc_type, code in EXIT_CODES:
            if isinstance(e, exc_type):
                click.echo(f"error: {e}", err=True)
                sys.exit(code)
        raise


@click.group()
@click.option("--run-dir", required=True, type=click.Path(path_type=Path))
@click.option("--config", "config_path", required=True, type=click.Path(path_type=Path))
@click.option("--provider", "provider_mode", type=click.Choice(["live", "replay"]), default=None)
@click.option("--conversation", default=None, help="restrict stages to one conversation id")
@click.option("-v", "--verbose", is_flag=True)
@click.pass_context
def main(ctx, run_dir, config_path, provider_mode, conversation, verbose):
    """Consolidation engine: reflect, synthesize, train, and the matched
    compaction-vs-consolidation experiment."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO)
    try:
        config = load_config(config_path)
    except ConfigError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(2)
    ctx.obj = Run(
        run_dir,
        config,
        config_base=Path(config_path).resolve().parent,
        provider_mode=provider_mode,
        conversation_filter=conversation,
    )


@main.command()
@click.pass_obj
def ingest(run: Run):
    """Validate and copy the corpus and questions into the run directory."""
    _run_stage(run.ingest)


@main.command()
@click.pass_obj
def compact(run: Run):
    """Run the cascading compaction cycles."""
    _run_stage(run.compact)


@main.command()
@click.pass_obj
def reflect(run: Run):
    """Extract the fact inventory (three passes per conversation, merged)."""
    _run_stage(run.reflect)


@main.command()
@click.pass_obj
def synthesize(run: Run):
    """Synthesize rehearsal training data and write training set + manifest."""
    _run_stage(run.synthesize)


@main.command()
@click.option("--epochs-sweep", type=int, default=None)
@click.pass_obj
def train(run: Run, epochs_sweep):
    """Delegate to the trainer component, or stage its inputs."""
    _run_stage(run.train, epochs_sweep)


@main.command()
@click.argument("condition")
@click.pass_obj
def evaluate(run: Run, condition):
    """Answer and judge the test questions under CONDITION."""
    _run_stage(run.evaluate, condition)


@main.command()
@click.pass_obj
def analyze(run: Run):
    """Score all judged conditions."""
    _run_stage(run.analyze)


@main.command()
@click.pass_obj
def report(run: Run):
    """Render retention tables, epoch-sweep CSV, and the summary document."""
    _run_stage(run.report)


@main.command(name="run-all")
@click.option("--epochs-sweep", type=int, default=None)
@click.pass_obj
def run_all(run: Run, epochs_sweep):
    """Execute the full dependency chain end to end."""
    _run_stage(run.run_all, epochs_sweep)


if __name__ == "__main__":
    main()
