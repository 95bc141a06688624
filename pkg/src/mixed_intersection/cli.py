"""
Mixed Intersection Simulator command line
run / sweep / check subcommands; exit codes 0 ok, 2 config error, 3 invariant breach
"""

import json
import logging
from pathlib import Path
from typing import Optional

import typer

from mixed_intersection.config.scenario_config import (
    ConfigError,
    ScenarioConfig,
    SignalPolicy,
    configure_logging,
    default_config_path,
    default_output_dir,
    load_config,
)
from mixed_intersection.tools.trace_tool import SafetyViolationError, TraceFormatError, check_run
from mixed_intersection.workflows.simulation_workflow import run_to_directory
from mixed_intersection.workflows.sweep_workflow import run_sweep, travel_time_table

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_INVARIANT_BREACH = 3

app = typer.Typer(
    help="Signalized intersection with mixed CAV/HDV traffic: planning, simulation and checks.",
    no_args_is_help=True,
    add_completion=False,
)


def _load(config: Optional[Path]) -> ScenarioConfig:
    path = config or default_config_path()
    return load_config(path) if path else ScenarioConfig()


def _fail(message: str, code: int) -> None:
    typer.echo(f"❌ {message}", err=True)
    raise typer.Exit(code=code)


@app.callback()
def main() -> None:
    configure_logging()


@app.command()
def run(
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="Scenario key=value file"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Random seed"),
    penetration: Optional[float] = typer.Option(None, "--penetration", help="CAV share in [0, 1]"),
    policy: Optional[SignalPolicy] = typer.Option(None, "--policy", help="Signal policy"),
    cycle: Optional[float] = typer.Option(None, "--cycle", help="Cycle length T_cycle (s)"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Run directory"),
) -> None:
    """Run one scenario and write trace.csv, schedule.csv, metrics.json and config.json."""
    try:
        scenario = _load(config).with_overrides(
            seed=seed, penetration=penetration, policy=policy, t_cycle=cycle
        )
    except ConfigError as e:
        _fail(f"Invalid configuration: {e}", EXIT_CONFIG_ERROR)

    out_dir = out or Path(default_output_dir())
    try:
        result, paths = run_to_directory(scenario, out_dir)
    except SafetyViolationError as e:
        _fail(f"Safety violation: {e}", EXIT_INVARIANT_BREACH)

    metrics = result.metrics
    typer.echo(
        json.dumps(
            {
                "complete": result.complete,
                "vehicle_count": metrics.vehicle_count,
                "exited_count": metrics.exited_count,
                "mean_travel_time": metrics.mean_travel_time,
                "mean_energy": metrics.mean_energy,
                "safety_breaches": result.stats["safety_breaches"],
                "files": paths,
            },
            indent=2,
        )
    )
    if result.stats["safety_breaches"]:
        raise typer.Exit(code=EXIT_INVARIANT_BREACH)


@app.command()
def sweep(
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="Base scenario file"),
    seeds: str = typer.Option("0", "--seeds", help="Comma-separated seeds"),
    vehicles: Optional[int] = typer.Option(None, "--vehicles", help="Vehicles per run"),
    workers: int = typer.Option(1, "--workers", "-j", help="Parallel runs"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Sweep directory"),
) -> None:
    """Run the {FC40, AC20, AC30, AC40} x {0, 0.5, 0.7} grid and write summary.csv."""
    try:
        base = _load(config).with_overrides(vehicle_count=vehicles)
        seed_list = [int(s) for s in seeds.split(",") if s.strip()]
    except ConfigError as e:
        _fail(f"Invalid configuration: {e}", EXIT_CONFIG_ERROR)
    except ValueError:
        _fail(f"Invalid seed list {seeds!r}", EXIT_CONFIG_ERROR)

    out_dir = out or Path(default_output_dir()) / "sweep"
    try:
        summary = run_sweep(base, out_dir, seeds=seed_list, workers=workers)
    except ConfigError as e:
        _fail(f"Invalid sweep cell: {e}", EXIT_CONFIG_ERROR)
    except SafetyViolationError as e:
        _fail(f"Safety violation: {e}", EXIT_INVARIANT_BREACH)

    typer.echo(travel_time_table(summary).round(2).to_string())
    if int(summary["safety_breaches"].sum()) > 0:
        raise typer.Exit(code=EXIT_INVARIANT_BREACH)


@app.command()
def check(run_dir: Path = typer.Argument(..., help="Directory written by `run`")) -> None:
    """Validate an emitted run directory against the safety and consistency invariants."""
    try:
        report = check_run(run_dir)
    except ConfigError as e:
        _fail(f"Invalid config.json: {e}", EXIT_CONFIG_ERROR)
    except (TraceFormatError, FileNotFoundError) as e:
        _fail(f"Unreadable run directory: {e}", EXIT_INVARIANT_BREACH)

    typer.echo(json.dumps(report.model_dump(), indent=2))
    if not report.passed:
        raise typer.Exit(code=EXIT_INVARIANT_BREACH)


if __name__ == "__main__":
    app()
