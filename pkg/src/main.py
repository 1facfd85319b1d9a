"""Main CLI entry point for the quantum Gibbs lab."""

import logging
import sys
from pathlib import Path
from typing import Any

import click
from rich.console import Console
from rich.table import Table

from src import __version__
from src.config import settings
from src.exceptions import CheckFailed, ConfigError, InstanceError, QGLError
from src.experiments import EXPERIMENTS, Experiment
from src.instance_config import ExperimentDocument, build_instance
from src.services.logger_service import cleanup_old_logs, setup_logging
from src.workflow import ExperimentRunner

console = Console()
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_INSTANCE = 3
MAX_TABLE_ROWS = 40


@click.group()
@click.version_option(version=__version__)
@click.option(
    "--verbose",
    "-v",
    is_flag=True,
    help="Enable verbose (DEBUG) logging",
)
@click.pass_context
def cli(ctx, verbose: bool):
    """
    Quantum Gibbs Lab - numerical checks for quantum Gibbs samplers.

    Builds Lindbladians from operator Fourier transforms, their discriminant
    proxies and block-encoding circuits, and writes CSV/JSON reports.
    """
    ctx.ensure_object(dict)
    ctx.obj["verbose"] = verbose
    setup_logging(verbose=verbose)
    cleanup_old_logs(max_age_days=settings.log_max_age_days)


def _rows_table(title: str, columns: list[str], rows: list[dict[str, Any]]) -> Table:
    table = Table(title=title)
    for column in columns:
        table.add_column(column, style="green" if column == "pass" else None)
    for row in rows[:MAX_TABLE_ROWS]:
        cells = []
        for column in columns:
            value = row.get(column)
            if isinstance(value, float):
                cells.append(f"{value:.4g}")
            elif value is None:
                cells.append("-")
            else:
                cells.append(str(value))
        table.add_row(*cells)
    return table


def _load(config_path: Path | None, name: str) -> ExperimentDocument:
    path = config_path or settings.experiments_dir / f"{name}.yaml"
    return ExperimentDocument(path)


def run_experiment(
    name: str,
    config_path: Path | None,
    out: Path | None,
    fmt: str | None,
    seed: int | None,
) -> int:
    """Run one experiment and map the outcome to an exit code."""
    try:
        document = _load(config_path, name)
        runner = ExperimentRunner(document, experiment=name, out=out, fmt=fmt, seed=seed)
        result = runner.run()
    except ConfigError as e:
        console.print(f"[red]✗ Configuration error: {e}[/red]")
        return EXIT_CONFIG
    except CheckFailed as e:
        console.print(f"[red]✗ {e}[/red]")
        columns = list(dict.fromkeys(k for row in e.failing_rows for k in row))
        console.print(_rows_table("Failing rows", columns, e.failing_rows))
        return EXIT_CHECK_FAILED
    except (InstanceError, QGLError) as e:
        console.print(f"[red]✗ Instance error: {e}[/red]")
        return EXIT_INSTANCE

    console.print(_rows_table(name, runner.experiment.columns, result.rows))
    console.print(f"[green]✓ Report written to {result.path}[/green]")
    return EXIT_OK


def _register(experiment: Experiment) -> None:
    help_text = (
        f"{experiment.description}.\n\nCSV columns: {', '.join(experiment.columns)}"
        + (f"\n\nSweep parameters: {', '.join(experiment.sweep_params)}"
           if experiment.sweep_params else "")
    )

    @click.option(
        "--config",
        "config_path",
        type=click.Path(dir_okay=False, path_type=Path),
        default=None,
        help="Experiment document (default: bundled config/experiments/<name>.yaml)",
    )
    @click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None)
    @click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None)
    @click.option("--seed", type=int, default=None, help="Base RNG seed")
    def command(config_path: Path | None, out: Path | None, fmt: str | None, seed: int | None):
        sys.exit(run_experiment(experiment.name, config_path, out, fmt, seed))

    cli.command(name=experiment.name, help=help_text)(command)


for _experiment in EXPERIMENTS.values():
    _register(_experiment)


@cli.command()
def list_experiments():
    """List registered experiments and their CSV columns."""
    console.print("\n[bold cyan]Registered experiments[/bold cyan]\n")
    table = Table(title="Experiments")
    table.add_column("Name", style="cyan")
    table.add_column("Description", style="green")
    table.add_column("Columns", style="yellow")
    table.add_column("Sweeps", style="magenta")
    for experiment in EXPERIMENTS.values():
        table.add_row(
            experiment.name,
            experiment.description,
            ", ".join(experiment.columns),
            ", ".join(experiment.sweep_params) or "-",
        )
    console.print(table)


@cli.command()
@click.option(
    "--config",
    "config_path",
    required=True,
    type=click.Path(dir_okay=False, path_type=Path),
    help="Experiment document to check",
)
def validate_config(config_path: Path):
    """Validate an experiment document and build the instance it describes."""
    console.print(f"\n[bold cyan]Checking {config_path}[/bold cyan]\n")
    try:
        document = ExperimentDocument(config_path)
        ExperimentRunner(document)
        instance = build_instance(document.config.instance)
    except ConfigError as e:
        console.print(f"[red]✗ Configuration error: {e}[/red]")
        sys.exit(EXIT_CONFIG)
    except (InstanceError, QGLError) as e:
        console.print(f"[red]✗ Instance error: {e}[/red]")
        sys.exit(EXIT_INSTANCE)

    config = document.config
    table = Table(title="Instance")
    table.add_column("Key", style="cyan")
    table.add_column("Value", style="green")
    table.add_row("experiment", config.experiment)
    table.add_row("qubits", str(config.instance.hamiltonian.n))
    table.add_row("||H||", f"{instance.hamiltonian.norm:.4f}")
    table.add_row("beta", f"{instance.context.beta:.4f}")
    table.add_row("N", str(instance.grid.N))
    table.add_row("omega0", f"{instance.grid.omega0:.5f}")
    table.add_row("jumps", ", ".join(instance.jumps.labels))
    table.add_row("filter", instance.filter.kind)
    table.add_row("weight", instance.weight.kind)
    if config.sweep:
        table.add_row("sweep", f"{config.sweep.param} = {config.sweep.values}")
    console.print(table)

    if instance.context.beta < config.instance.beta:
        console.print(f"[yellow]⚠ beta capped to {instance.context.beta:.4f}[/yellow]")
    if instance.jumps.detect_adjoint_permutation() is None:
        console.print(
            "[yellow]⚠ jump set is not adjoint-closed; proxies are unavailable[/yellow]"
        )
    console.print("[green]✓ Configuration is valid[/green]")


if __name__ == "__main__":
    cli()
