"""
Metrics Tool for Mixed Intersection Simulator
Per-vehicle travel time, energy proxy and stop counts computed from a trace table
"""

import logging
from typing import List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

logger = logging.getLogger(__name__)

METRICS_SCHEMA_VERSION = 1
STOP_SPEED = 0.1


class VehicleMetrics(BaseModel):
    """Outcome of one vehicle"""
    model_config = ConfigDict(frozen=True)

    vehicle_id: int
    vehicle_class: str
    path: str
    entry_time: float
    exit_time: Optional[float] = None
    travel_time: Optional[float] = None
    energy: float
    stops: int


class MetricsReport(BaseModel):
    """Per-vehicle metrics and their class-wise means; means cover exited vehicles only"""
    model_config = ConfigDict(frozen=True)

    schema_version: int = METRICS_SCHEMA_VERSION
    complete: bool = True
    vehicles: List[VehicleMetrics]
    vehicle_count: int
    exited_count: int
    mean_travel_time: Optional[float] = None
    mean_travel_time_cav: Optional[float] = None
    mean_travel_time_hdv: Optional[float] = None
    mean_energy: Optional[float] = None
    mean_energy_cav: Optional[float] = None
    mean_energy_hdv: Optional[float] = None
    mean_stops: Optional[float] = None


def energy_proxy(times: np.ndarray, accelerations: np.ndarray) -> float:
    """Left-rectangle sum of ½u²Δt over consecutive samples"""
    if len(times) < 2:
        return 0.0
    return float(np.sum(0.5 * accelerations[:-1] ** 2 * np.diff(times)))


def count_stops(velocities: np.ndarray) -> int:
    """Number of times the speed drops below the stop threshold"""
    below = velocities < STOP_SPEED
    if len(below) < 2:
        return 0
    return int(np.count_nonzero(below[1:] & ~below[:-1]))


def _mean(values: List[float]) -> Optional[float]:
    return float(np.mean(values)) if values else None


def compute_metrics(trace: pd.DataFrame, zone_length: float, complete: bool = True) -> MetricsReport:
    """
    Compute the metrics summary from a trace table.

    Args:
        trace: Trace rows ordered by time then vehicle id
        zone_length: Exit position (m); a vehicle whose last row reaches it has exited
        complete: Whether the run finished normally

    Returns:
        MetricsReport
    """
    vehicles = []
    for vehicle_id, rows in trace.groupby("vehicle_id", sort=True):
        times = rows["time"].to_numpy(dtype=float)
        positions = rows["position"].to_numpy(dtype=float)
        exited = positions[-1] >= zone_length - 1e-6
        entry = float(times[0])
        exit_time = float(times[-1]) if exited else None
        vehicles.append(
            VehicleMetrics(
                vehicle_id=int(vehicle_id),
                vehicle_class=str(rows["vehicle_class"].iloc[0]),
                path=str(rows["path"].iloc[0]),
                entry_time=entry,
                exit_time=exit_time,
                travel_time=None if exit_time is None else exit_time - entry,
                energy=energy_proxy(times, rows["acceleration"].to_numpy(dtype=float)),
                stops=count_stops(rows["velocity"].to_numpy(dtype=float)),
            )
        )

    done = [v for v in vehicles if v.travel_time is not None]
    by_class = {
        cls: [v for v in done if v.vehicle_class == cls] for cls in ("cav", "hdv")
    }
    return MetricsReport(
        complete=complete,
        vehicles=vehicles,
        vehicle_count=len(vehicles),
        exited_count=len(done),
        mean_travel_time=_mean([v.travel_time for v in done]),
        mean_travel_time_cav=_mean([v.travel_time for v in by_class["cav"]]),
        mean_travel_time_hdv=_mean([v.travel_time for v in by_class["hdv"]]),
        mean_energy=_mean([v.energy for v in done]),
        mean_energy_cav=_mean([v.energy for v in by_class["cav"]]),
        mean_energy_hdv=_mean([v.energy for v in by_class["hdv"]]),
        mean_stops=_mean([float(v.stops) for v in done]),
    )
