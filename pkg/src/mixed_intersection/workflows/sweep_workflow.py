"""
Sweep Workflow for Mixed Intersection Simulator
Runs the policy x cycle x penetration grid over a list of seeds and tabulates mean exit times
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import pandas as pd
from pydantic import BaseModel, ConfigDict

from mixed_intersection.config.scenario_config import ScenarioConfig, SignalPolicy
from mixed_intersection.workflows.simulation_workflow import run_to_directory

logger = logging.getLogger(__name__)

SUMMARY_FILE = "summary.csv"
DEFAULT_PENETRATIONS: Tuple[float, ...] = (0.0, 0.5, 0.7)
SUMMARY_COLUMNS = [
    "cell",
    "policy",
    "t_cycle",
    "penetration",
    "seed",
    "complete",
    "vehicle_count",
    "exited_count",
    "mean_travel_time",
    "mean_travel_time_cav",
    "mean_travel_time_hdv",
    "mean_energy",
    "mean_stops",
    "safety_breaches",
    "run_dir",
]


class SweepCell(BaseModel):
    """One signal setting of the grid, e.g. FC40 or AC20"""
    model_config = ConfigDict(frozen=True)

    policy: SignalPolicy
    t_cycle: float

    @property
    def label(self) -> str:
        prefix = "FC" if self.policy == SignalPolicy.FIXED else "AC"
        return f"{prefix}{self.t_cycle:g}"


DEFAULT_CELLS: Tuple[SweepCell, ...] = (
    SweepCell(policy=SignalPolicy.FIXED, t_cycle=40.0),
    SweepCell(policy=SignalPolicy.ADAPTIVE, t_cycle=20.0),
    SweepCell(policy=SignalPolicy.ADAPTIVE, t_cycle=30.0),
    SweepCell(policy=SignalPolicy.ADAPTIVE, t_cycle=40.0),
)


def cell_config(base: ScenarioConfig, cell: SweepCell, penetration: float, seed: int) -> ScenarioConfig:
    """Base configuration with one grid point's overrides applied"""
    values: Dict[str, Any] = base.model_dump(exclude_unset=True)
    # cycle-specific keys of the base no longer fit a different cycle length
    if cell.t_cycle != base.t_cycle:
        for key in ("t_update", "first_cycle_durations", "fixed_durations"):
            values.pop(key, None)
    # t_min scales with the cycle when the base minimum green no longer fits four phases
    if cell.t_cycle <= 4.0 * base.t_min:
        values["t_min"] = base.t_min * cell.t_cycle / base.t_cycle
    values.update(policy=cell.policy, t_cycle=cell.t_cycle, penetration=penetration, seed=seed)
    return ScenarioConfig.build(**values)


def _run_cell(config: ScenarioConfig, label: str, run_dir: str) -> Dict[str, Any]:
    result, _ = run_to_directory(config, run_dir)
    metrics = result.metrics
    return {
        "cell": label,
        "policy": config.policy.value,
        "t_cycle": config.t_cycle,
        "penetration": config.penetration,
        "seed": config.seed,
        "complete": result.complete,
        "vehicle_count": metrics.vehicle_count,
        "exited_count": metrics.exited_count,
        "mean_travel_time": metrics.mean_travel_time,
        "mean_travel_time_cav": metrics.mean_travel_time_cav,
        "mean_travel_time_hdv": metrics.mean_travel_time_hdv,
        "mean_energy": metrics.mean_energy,
        "mean_stops": metrics.mean_stops,
        "safety_breaches": result.stats.get("safety_breaches", 0),
        "run_dir": run_dir,
    }


def run_sweep(
    base: ScenarioConfig,
    out_dir: Union[str, Path],
    seeds: Sequence[int] = (0,),
    cells: Sequence[SweepCell] = DEFAULT_CELLS,
    penetrations: Sequence[float] = DEFAULT_PENETRATIONS,
    workers: Optional[int] = 1,
) -> pd.DataFrame:
    """
    Run every (cell, penetration, seed) combination, each into its own sub-directory.

    Args:
        base: Configuration shared by every run
        out_dir: Directory receiving one sub-directory per run plus summary.csv
        seeds: Seeds to repeat each grid point with
        cells: Signal settings
        penetrations: CAV penetration rates
        workers: Process count; 1 runs sequentially, None lets the pool decide

    Returns:
        Summary table, one row per run, also written to summary.csv
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = []
    for cell in cells:
        for penetration in penetrations:
            for seed in seeds:
                config = cell_config(base, cell, penetration, seed)
                run_dir = out / f"{cell.label}_p{penetration:g}_s{seed}"
                jobs.append((config, cell.label, str(run_dir)))

    logger.info(f"🚀 Sweep of {len(jobs)} runs into {out} (workers={workers})")
    if workers == 1:
        rows = [_run_cell(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_cell, *job) for job in jobs]
            rows = [future.result() for future in futures]

    summary = pd.DataFrame(rows, columns=SUMMARY_COLUMNS)
    summary.to_csv(out / SUMMARY_FILE, index=False, lineterminator="\n")
    logger.info(f"✅ Sweep finished, summary written to {out / SUMMARY_FILE}")
    return summary


def travel_time_table(summary: pd.DataFrame) -> pd.DataFrame:
    """Mean exit time per signal setting (rows) and penetration (columns), averaged over seeds"""
    table = summary.pivot_table(
        index="cell", columns="penetration", values="mean_travel_time", aggfunc="mean"
    )
    order: List[str] = [c.label for c in DEFAULT_CELLS if c.label in table.index]
    order += [label for label in table.index if label not in order]
    return table.loc[order]
