"""
Main CLI application entry point for deephvi.

Trains network solutions of the benchmark contact problems, evaluates them
against reference solutions and reproduces the published experiments through
named presets.
"""

import json
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional

import typer
from pydantic import ValidationError
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from .config import Algorithm, ExperimentPreset, TrainConfig, default_config
from .exceptions import ContractViolation, HVIError
from .modules import (
    PresetManager,
    ReferenceSolution,
    RunManager,
    export_field,
    get_problem,
    write_export,
)
from .modules.network import ParamVector
from .utils import (
    load_checkpoint,
    setup_logger,
    validate_epochs_scale,
    validate_output_dir,
    validate_resolution,
    validate_seed,
    validate_workers,
)

# Initialize consoles and logger
console = Console()
err_console = Console(stderr=True)
logger = setup_logger(console=err_console)

# Create the main Typer app
app = typer.Typer(
    name="deephvi",
    help="Deep learning solvers for elliptic hemivariational inequalities in contact mechanics",
    rich_markup_mode="rich",
    no_args_is_help=True,
)
preset_app = typer.Typer(help="List, inspect, save and run experiment presets", no_args_is_help=True)
app.add_typer(preset_app, name="preset")

preset_manager = PresetManager()


def _fail(error: HVIError) -> None:
    err_console.print(f"[red]Error: {error.message}[/red]")
    sys.stderr.write(json.dumps(error.to_dict(), default=str) + "\n")
    raise typer.Exit(1)


@contextmanager
def handle_errors() -> Iterator[None]:
    """Turn library errors into a red message, a JSON error object and exit code 1."""
    try:
        yield
    except HVIError as e:
        _fail(e)
    except ValidationError as e:
        _fail(ContractViolation(f"Invalid configuration: {e}", details={"errors": e.errors()}))
    except (OSError, json.JSONDecodeError) as e:
        _fail(ContractViolation(str(e), details={"type": type(e).__name__}))
    except KeyboardInterrupt:
        err_console.print("\n[yellow]Operation cancelled by user[/yellow]")
        raise typer.Exit(1)


def load_config(path: Path) -> TrainConfig:
    """A TrainConfig JSON file, or an exported preset whose config is used."""
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    if isinstance(data, dict) and "config" in data and "name" in data:
        return ExperimentPreset.model_validate(data).config
    return TrainConfig.model_validate(data)


def apply_overrides(cfg: TrainConfig, **overrides: Any) -> TrainConfig:
    """Re-validated copy of ``cfg`` with the non-None overrides applied."""
    updates = {k: v for k, v in overrides.items() if v is not None}
    return TrainConfig.model_validate({**cfg.model_dump(), **updates})


def _check_common(seed: Optional[int], epochs_scale: float, workers: Optional[int]) -> None:
    if seed is not None and not validate_seed(seed):
        raise ContractViolation(f"Seed must be an unsigned 64-bit integer, got {seed}")
    if not validate_epochs_scale(epochs_scale):
        raise ContractViolation(f"--epochs-scale must be in (0, 1], got {epochs_scale}")
    if workers is not None and not validate_workers(workers):
        raise ContractViolation(f"--workers must be between 1 and the CPU count, got {workers}")


def _load_reference(path: Optional[Path]) -> Optional[ReferenceSolution]:
    return ReferenceSolution.load_csv(path) if path else None


def _print_summary(summary: Dict[str, Any]) -> None:
    table = Table(title="Run Summary")
    table.add_column("Field", style="cyan")
    table.add_column("Value", style="magenta")
    for key in ("problem", "algorithm", "seed", "status", "steps", "final_loss", "relative_error", "expected_error"):
        if summary.get(key) is not None:
            table.add_row(key, str(summary[key]))
    if summary.get("final_energy"):
        table.add_row("final_energy", f"{summary['final_energy']['total']:.6e}")
    console.print(table)


def _run(
    cfg: TrainConfig,
    out: Optional[Path],
    reference: Optional[Path],
    progress: bool,
    preset: Optional[str] = None,
    expected_error: Optional[float] = None,
) -> None:
    console.print(Panel(
        f"[bold blue]deephvi training[/bold blue]\n"
        f"Problem: {cfg.problem}\n"
        f"Algorithm: {cfg.algorithm.value}\n"
        f"Network: {cfg.arch.kind.value} ({cfg.arch.activation.value})\n"
        f"Epochs: {cfg.planned_epochs()}\n"
        f"Seed: {cfg.seed}",
        border_style="blue"
    ))
    if out is not None:
        ok, reason = validate_output_dir(out)
        if not ok:
            raise ContractViolation(f"Cannot write run directory: {reason}", details={"out": str(out)})
    ref = _load_reference(reference)
    summary = RunManager(err_console).run(
        cfg,
        run_dir=out,
        reference=ref,
        preset=preset,
        expected_error=expected_error,
        show_progress=progress,
    )
    _print_summary(summary)
    logger.info(f"Run directory: {summary['run_dir']}")
    console.print("\n[green]✓ Training completed successfully[/green]")


@app.command()
def train(
    problem: Optional[str] = typer.Option(
        None, "--problem", help="bilateral, normal-compliance or manufactured"
    ),
    algorithm: Optional[Algorithm] = typer.Option(
        None, "--algorithm", "-a", help="Training algorithm"
    ),
    config: Optional[Path] = typer.Option(
        None, "--config", "-c", exists=True, dir_okay=False, help="JSON TrainConfig overrides"
    ),
    seed: Optional[int] = typer.Option(None, "--seed", "-s", help="64-bit run seed"),
    out: Optional[Path] = typer.Option(
        None, "--out", "-o", help="Run directory (default: $HVI_OUT_DIR/<run name>)"
    ),
    epochs_scale: float = typer.Option(
        1.0, "--epochs-scale", help="Scale every epoch budget by this factor"
    ),
    workers: Optional[int] = typer.Option(
        None, "--workers", "-w", help="Gradient shards evaluated in parallel"
    ),
    reference: Optional[Path] = typer.Option(
        None, "--reference", "-r", exists=True, dir_okay=False, help="Reference CSV for the error report"
    ),
    progress: bool = typer.Option(True, "--progress/--no-progress", help="Show a progress bar"),
):
    """
    Train a network solution of one problem.

    Examples:
        deephvi train --problem bilateral --algorithm multigrid --seed 1
        deephvi train --config run.json --epochs-scale 0.01 --out runs/smoke
    """
    with handle_errors():
        _check_common(seed, epochs_scale, workers)
        if config is not None:
            cfg = load_config(config)
            cfg = apply_overrides(cfg, problem=problem, algorithm=algorithm)
        else:
            cfg = default_config(problem or "bilateral", algorithm or Algorithm.BASIC)
        cfg = apply_overrides(cfg, seed=seed, workers=workers)
        if epochs_scale != 1.0:
            cfg = cfg.scaled(epochs_scale)
        get_problem(cfg.problem)
        _run(cfg, out, reference, progress)


def _load_theta(checkpoint: Path) -> tuple[ParamVector, Dict[str, Any]]:
    arch, values, metadata = load_checkpoint(checkpoint)
    return ParamVector(arch, values), metadata


@app.command("eval")
def evaluate(
    checkpoint: Path = typer.Option(..., "--checkpoint", exists=True, dir_okay=False, help="Checkpoint file"),
    reference: Optional[Path] = typer.Option(
        None, "--reference", "-r", exists=True, dir_okay=False, help="Reference CSV (x,y,w,u1,u2,du1dx,du1dy,du2dx,du2dy)"
    ),
    problem: Optional[str] = typer.Option(
        None, "--problem", help="Problem name (default: from the checkpoint)"
    ),
):
    """Relative energy-norm error of a checkpoint against a reference solution."""
    with handle_errors():
        theta, metadata = _load_theta(checkpoint)
        spec = get_problem(problem or metadata.get("problem", "bilateral"))
        report = RunManager(err_console).evaluate(theta, spec, _load_reference(reference))

        table = Table(title=f"Error Report ({spec.name})")
        table.add_column("Measure", style="cyan")
        table.add_column("Value", style="magenta", justify="right")
        table.add_row("‖u_ref‖_E", f"{report['energy_norm_ref']:.6e}")
        table.add_row("‖u − u_ref‖_E", f"{report['energy_norm_diff']:.6e}")
        table.add_row("Relative error", f"{report['relative_error']:.6f}")
        err_console.print(table)
        typer.echo(json.dumps(report))


@app.command()
def export(
    checkpoint: Path = typer.Option(..., "--checkpoint", exists=True, dir_okay=False, help="Checkpoint file"),
    resolution: int = typer.Option(101, "--resolution", "-n", help="Grid points per axis"),
    out: Path = typer.Option(Path("field.csv"), "--out", "-o", help="Output CSV"),
    problem: Optional[str] = typer.Option(
        None, "--problem", help="Problem name (default: from the checkpoint)"
    ),
):
    """Export the displacement field on a uniform grid plus the contact boundary."""
    with handle_errors():
        if not validate_resolution(resolution):
            raise ContractViolation(f"--resolution must be at least 2, got {resolution}")
        theta, metadata = _load_theta(checkpoint)
        spec = get_problem(problem or metadata.get("problem", "bilateral"))
        rows = export_field(theta, spec, resolution)
        write_export(out, rows)
        console.print(f"[green]✓ Wrote {len(rows)} rows to {out}[/green]")


@app.command()
def compare(
    summaries: List[Path] = typer.Argument(..., exists=True, help="summary.json files or run directories"),
):
    """Tabulate relative errors and accuracy improvement over the first run."""
    with handle_errors():
        manager = RunManager(console)
        manager.display_comparison(manager.compare(summaries))


@preset_app.command("list")
def list_presets():
    """List all available presets."""
    table = Table(title="Experiment Presets")
    table.add_column("Name", style="cyan")
    table.add_column("Type", style="white")
    table.add_column("Algorithm", style="white")
    table.add_column("Epochs", style="white", justify="right")
    table.add_column("Expected error", style="magenta", justify="right")
    for name, kind in preset_manager.list_all_presets().items():
        preset = preset_manager.load_preset(name)
        if preset is None:
            continue
        expected = f"{preset.expected_error:.4f}" if preset.expected_error is not None else "-"
        table.add_row(
            name, kind, preset.config.algorithm.value, str(preset.config.planned_epochs()), expected
        )
    console.print(table)


@preset_app.command("show")
def show_preset(name: str = typer.Argument(..., help="Preset name to show")):
    """Show details of a specific preset."""
    with handle_errors():
        info = preset_manager.get_preset_info(name)
        table = Table(title=f"Preset: {name}")
        table.add_column("Setting", style="cyan")
        table.add_column("Value", style="magenta")
        for key, value in info.items():
            table.add_row(key, "-" if value is None else str(value))
        console.print(table)


@preset_app.command("export")
def export_preset(
    name: str = typer.Argument(..., help="Preset name to export"),
    out: Path = typer.Option(..., "--out", "-o", help="Destination JSON file"),
):
    """Write a preset as JSON, ready to edit and pass back with --config."""
    with handle_errors():
        preset_manager.get_preset(name)
        if not preset_manager.export_preset(name, out):
            raise ContractViolation(f"Could not export preset '{name}'", details={"out": str(out)})
        console.print(f"[green]✓ Exported '{name}' to {out}[/green]")


@preset_app.command("save")
def save_preset(
    name: str = typer.Argument(..., help="Name of the new custom preset"),
    config: Path = typer.Option(
        ..., "--config", "-c", exists=True, dir_okay=False, help="TrainConfig or preset JSON"
    ),
    description: str = typer.Option("", "--description", "-d", help="Free-text description"),
    expected_error: Optional[float] = typer.Option(
        None, "--expected-error", help="Relative error the preset is expected to reach"
    ),
):
    """Save a training configuration as a custom preset."""
    with handle_errors():
        preset = ExperimentPreset(
            name=name, description=description, config=load_config(config), expected_error=expected_error
        )
        if not preset_manager.save_preset(preset):
            raise ContractViolation(
                f"Could not save preset '{name}'", details={"presets_dir": str(preset_manager.presets_dir)}
            )
        console.print(f"[green]✓ Saved preset '{name}'[/green]")


@preset_app.command("delete")
def delete_preset(name: str = typer.Argument(..., help="Custom preset to delete")):
    """Delete a custom preset."""
    with handle_errors():
        preset_manager.get_preset(name)
        if not preset_manager.delete_preset(name):
            raise ContractViolation(f"Could not delete preset '{name}'")
        console.print(f"[green]✓ Deleted preset '{name}'[/green]")


@preset_app.command("run")
def run_preset(
    name: str = typer.Argument(..., help="Preset name to run"),
    seed: Optional[int] = typer.Option(None, "--seed", "-s", help="64-bit run seed"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Run directory"),
    epochs_scale: float = typer.Option(
        1.0, "--epochs-scale", help="Scale every epoch budget by this factor"
    ),
    workers: Optional[int] = typer.Option(None, "--workers", "-w", help="Gradient shards"),
    reference: Optional[Path] = typer.Option(
        None, "--reference", "-r", exists=True, dir_okay=False, help="Reference CSV for the error report"
    ),
    progress: bool = typer.Option(True, "--progress/--no-progress", help="Show a progress bar"),
):
    """Run a preset and write its summary (with the error when a reference is given)."""
    with handle_errors():
        _check_common(seed, epochs_scale, workers)
        preset = preset_manager.get_preset(name)
        cfg = apply_overrides(preset.config, seed=seed, workers=workers)
        if epochs_scale != 1.0:
            cfg = cfg.scaled(epochs_scale)
        _run(cfg, out, reference, progress, preset=preset.name, expected_error=preset.expected_error)


@app.callback(invoke_without_command=True)
def main(
    ctx: typer.Context,
    version: bool = typer.Option(
        False, "--version", "-v", help="Show version and exit"
    ),
    log_level: Optional[str] = typer.Option(
        None, "--log-level", help="Logging level (default: $HVI_LOG_LEVEL or INFO)"
    ),
):
    """
    deephvi - deep learning solvers for hemivariational inequalities.

    Minimizes the nonsmooth energy of 2D contact problems over residual
    network ansatzes with basic, blockwise and adaptive multigrid training.
    """
    if version:
        from . import __version__
        console.print(f"deephvi v{__version__}")
        raise typer.Exit()
    if log_level:
        setup_logger(level=log_level, console=err_console)
    if ctx.invoked_subcommand is None:
        console.print(ctx.get_help())
        raise typer.Exit()


def cli():
    """Entry point for the CLI application."""
    try:
        app()
    except KeyboardInterrupt:
        err_console.print("\n[yellow]Operation cancelled[/yellow]")
        sys.exit(1)


if __name__ == "__main__":
    cli()
