"""
Mixed Intersection MCP Server
Exposes scenario runs, the table sweep, the run checker and single-CAV planning as MCP tools
"""

import asyncio
import json
import logging
from pathlib import Path
from typing import List, Optional

from mcp.server import FastMCP

from mixed_intersection.config.scenario_config import (
    ScenarioConfig,
    configure_logging,
    default_config_path,
    default_output_dir,
    load_config,
)
from mixed_intersection.tools.cav_planner_tool import PlanningContext
from mixed_intersection.tools.standby_tool import critical_acceleration
from mixed_intersection.tools.standby_tool import latest_stop_time as compute_latest_stop_time
from mixed_intersection.tools.trace_tool import check_run as check_run_directory
from mixed_intersection.tools.trajectory_tool import VehicleState
from mixed_intersection.workflows.decision_cascade import plan_cav
from mixed_intersection.workflows.simulation_workflow import run_to_directory
from mixed_intersection.workflows.sweep_workflow import run_sweep, travel_time_table

logger = logging.getLogger(__name__)

server = FastMCP("mixed-intersection")


def _scenario(config_path: Optional[str], **overrides) -> ScenarioConfig:
    path = config_path or default_config_path()
    base = load_config(path) if path else ScenarioConfig()
    return base.with_overrides(**overrides)


@server.tool()
async def run_scenario(
    config_path: Optional[str] = None,
    seed: Optional[int] = None,
    penetration: Optional[float] = None,
    policy: Optional[str] = None,
    cycle: Optional[float] = None,
    vehicle_count: Optional[int] = None,
    out_dir: Optional[str] = None,
) -> str:
    """Run one scenario, write its run directory and return the metrics summary"""
    try:
        config = _scenario(
            config_path,
            seed=seed,
            penetration=penetration,
            policy=policy,
            t_cycle=cycle,
            vehicle_count=vehicle_count,
        )
        target = out_dir or str(Path(default_output_dir()) / f"run_s{config.seed}")
        result, paths = await asyncio.to_thread(run_to_directory, config, target)
        metrics = result.metrics
        summary = {
            "complete": result.complete,
            "vehicle_count": metrics.vehicle_count,
            "exited_count": metrics.exited_count,
            "mean_travel_time": metrics.mean_travel_time,
            "mean_travel_time_cav": metrics.mean_travel_time_cav,
            "mean_travel_time_hdv": metrics.mean_travel_time_hdv,
            "mean_energy": metrics.mean_energy,
            "mean_stops": metrics.mean_stops,
            "planning": result.stats,
            "files": paths,
        }
        return json.dumps(summary, indent=2)
    except Exception as e:
        raise RuntimeError(f"Failed to run scenario: {str(e)}")


@server.tool()
async def run_table_sweep(
    config_path: Optional[str] = None,
    seeds: str = "0",
    vehicle_count: Optional[int] = None,
    out_dir: Optional[str] = None,
    workers: int = 1,
) -> str:
    """Run the fixed/adaptive cycle x penetration grid and return mean exit times per cell"""
    try:
        base = _scenario(config_path, vehicle_count=vehicle_count)
        seed_list = [int(s) for s in seeds.split(",") if s.strip()]
        target = out_dir or str(Path(default_output_dir()) / "sweep")
        summary = await asyncio.to_thread(run_sweep, base, target, seed_list, workers=workers)
        table = travel_time_table(summary)
        result = {
            "runs": len(summary),
            "safety_breaches": int(summary["safety_breaches"].sum()),
            "mean_travel_time": {
                cell: {str(p): table.loc[cell, p] for p in table.columns} for cell in table.index
            },
            "summary_file": str(Path(target) / "summary.csv"),
        }
        return json.dumps(result, indent=2, default=float)
    except Exception as e:
        raise RuntimeError(f"Failed to run sweep: {str(e)}")


@server.tool()
async def check_run(run_dir: str) -> str:
    """Validate an emitted run directory against the safety and consistency invariants"""
    try:
        report = await asyncio.to_thread(check_run_directory, run_dir)
        return json.dumps(report.model_dump(), indent=2)
    except Exception as e:
        raise RuntimeError(f"Failed to check run: {str(e)}")


@server.tool()
async def plan_single_cav(
    position: float,
    velocity: float,
    time: float = 0.0,
    green_windows: Optional[List[List[float]]] = None,
    config_path: Optional[str] = None,
) -> str:
    """
    Run the decision cascade for one CAV with no predecessor against a fixed green schedule.

    green_windows is a list of [start, end] pairs in seconds; omitted means no light constraint.
    """
    try:
        config = _scenario(config_path)
        windows = None if green_windows is None else tuple((float(g[0]), float(g[1])) for g in green_windows)
        ctx = PlanningContext(
            bounds=config.bounds,
            green_windows=windows,
            light_position=config.light_position,
            delta_t=config.delta_t,
            check_grid=config.check_grid,
            t_cap=config.t_cap,
            v_des=config.v_des,
        )
        state = VehicleState(position=position, velocity=velocity, time=time)
        outcome = await asyncio.to_thread(plan_cav, ctx, state, config.zone_length)
        return json.dumps(outcome.summary(), indent=2)
    except Exception as e:
        raise RuntimeError(f"Failed to plan CAV: {str(e)}")


@server.tool()
async def latest_stop_time(velocity: float, distance: float, u_min: float = -5.0) -> str:
    """Latest stopping time and critical initial deceleration for stopping at a given distance"""
    try:
        stop_time = compute_latest_stop_time(velocity, distance, u_min)
        u_c = critical_acceleration(velocity, distance)
        result = {
            "velocity": velocity,
            "distance": distance,
            "stop_time": stop_time,
            "critical_acceleration": u_c,
            "cubic_feasible": u_c >= u_min,
        }
        return json.dumps(result, indent=2)
    except Exception as e:
        raise RuntimeError(f"Failed to compute latest stop time: {str(e)}")


def main():
    """Main entry point for the MCP server"""
    configure_logging()
    logger.info("🚀 Starting Mixed Intersection MCP Server...")
    server.run(transport="stdio")


if __name__ == "__main__":
    main()
