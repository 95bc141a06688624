"""
Trace Tool for Mixed Intersection Simulator
Trace and schedule serialization, run-directory emission and the post-hoc invariant checker
"""

import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from mixed_intersection.config.scenario_config import ScenarioConfig
from mixed_intersection.tools.metrics_tool import MetricsReport, compute_metrics
from mixed_intersection.tools.signal_tool import PhaseTopology, default_topology
from mixed_intersection.tools.trajectory_tool import VehicleClass

logger = logging.getLogger(__name__)

TRACE_SCHEMA_VERSION = 1
TRACE_COLUMNS = [
    "time",
    "vehicle_id",
    "vehicle_class",
    "path",
    "position",
    "velocity",
    "acceleration",
    "mode",
    "active_phase",
]
SCHEDULE_COLUMNS = [
    "cycle_index",
    "cycle_start",
    "position",
    "phase",
    "green_start",
    "green_end",
    "broadcast_time",
]
TRACE_FILE = "trace.csv"
SCHEDULE_FILE = "schedule.csv"
METRICS_FILE = "metrics.json"
CONFIG_FILE = "config.json"
CHECK_TOLERANCE = 1e-6


class SimulationError(Exception):
    """Custom exception for simulation runs"""
    pass


class SafetyViolationError(SimulationError):
    """Raised when a run breaches the rear-end or collision invariant"""

    def __init__(self, message: str, dump_path: Optional[str] = None):
        self.dump_path = dump_path
        super().__init__(message if dump_path is None else f"{message} (trace dumped to {dump_path})")


class TraceFormatError(SimulationError):
    """Raised when a trace file does not match the pinned schema"""
    pass


class VehicleMode(str, Enum):
    UNCONSTRAINED = "unconstrained"
    CONSTRAINED = "constrained"
    STANDBY = "standby"
    IDM = "idm"


PLANNED_MODES = {VehicleMode.UNCONSTRAINED.value, VehicleMode.CONSTRAINED.value, VehicleMode.STANDBY.value}

LEGAL_TRANSITIONS: Dict[str, Dict[str, set]] = {
    VehicleClass.CAV.value: {
        VehicleMode.UNCONSTRAINED.value: {"constrained", "standby", "idm"},
        VehicleMode.CONSTRAINED.value: {"unconstrained", "standby", "idm"},
        VehicleMode.STANDBY.value: {"unconstrained", "constrained", "idm"},
        VehicleMode.IDM.value: {"unconstrained", "constrained", "standby"},
    },
    VehicleClass.HDV.value: {VehicleMode.IDM.value: set()},
}


class TraceRecord(BaseModel):
    """One vehicle at one instant"""
    model_config = ConfigDict(frozen=True)

    time: float
    vehicle_id: int
    vehicle_class: VehicleClass
    path: str
    position: float
    velocity: float
    acceleration: float
    mode: VehicleMode
    active_phase: int = Field(ge=-1, le=3)

    def as_row(self) -> tuple:
        return (
            self.time,
            self.vehicle_id,
            self.vehicle_class.value,
            self.path,
            self.position,
            self.velocity,
            self.acceleration,
            self.mode.value,
            self.active_phase,
        )


class CheckReport(BaseModel):
    """Outcome of the post-hoc invariant checks on one run directory"""

    passed: bool
    violations: List[str] = []
    rear_end_violations: int = 0
    collisions: int = 0
    red_light_crossings: int = 0
    metrics_round_trip: bool = True


def records_to_frame(rows: Sequence[tuple]) -> pd.DataFrame:
    """Build the trace table from engine row tuples, ordered by time then vehicle id"""
    frame = pd.DataFrame.from_records(list(rows), columns=TRACE_COLUMNS)
    frame = frame.astype(
        {"time": float, "vehicle_id": int, "position": float, "velocity": float,
         "acceleration": float, "active_phase": int}
    )
    return frame.sort_values(["time", "vehicle_id"], kind="mergesort").reset_index(drop=True)


def config_to_dict(config: ScenarioConfig) -> Dict[str, Any]:
    return {
        key: value.value if isinstance(value, Enum) else value
        for key, value in config.model_dump().items()
    }


def emit(
    trace: pd.DataFrame,
    schedule_rows: Sequence[Dict[str, Any]],
    metrics: MetricsReport,
    config: ScenarioConfig,
    out_dir: Union[str, Path],
    planning_stats: Optional[Dict[str, Any]] = None,
) -> Dict[str, str]:
    """
    Write trace.csv, schedule.csv, metrics.json and config.json into out_dir.

    Returns:
        Mapping of artifact name to written path
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "trace": out / TRACE_FILE,
        "schedule": out / SCHEDULE_FILE,
        "metrics": out / METRICS_FILE,
        "config": out / CONFIG_FILE,
    }
    trace[TRACE_COLUMNS].to_csv(paths["trace"], index=False, lineterminator="\n")
    pd.DataFrame(list(schedule_rows), columns=SCHEDULE_COLUMNS).to_csv(
        paths["schedule"], index=False, lineterminator="\n"
    )
    payload = metrics.model_dump()
    if planning_stats is not None:
        payload["planning"] = planning_stats
    paths["metrics"].write_text(json.dumps(payload, indent=2) + "\n")
    paths["config"].write_text(json.dumps(config_to_dict(config), indent=2) + "\n")
    logger.info(f"✅ Run written to {out} ({len(trace)} trace rows)")
    return {name: str(path) for name, path in paths.items()}


def read_trace(path: Union[str, Path]) -> pd.DataFrame:
    """Parse a trace file, rejecting anything but the pinned header"""
    path = Path(path)
    with path.open() as handle:
        header = handle.readline().strip().split(",")
    if header != TRACE_COLUMNS:
        raise TraceFormatError(f"{path}: header {header} does not match {TRACE_COLUMNS}")
    return pd.read_csv(
        path,
        float_precision="round_trip",
        dtype={"vehicle_class": str, "path": str, "mode": str},
    )


def read_schedule(path: Union[str, Path]) -> pd.DataFrame:
    path = Path(path)
    frame = pd.read_csv(path, float_precision="round_trip")
    if list(frame.columns) != SCHEDULE_COLUMNS:
        raise TraceFormatError(f"{path}: unexpected schedule header {list(frame.columns)}")
    return frame


def _check_rear_end(trace: pd.DataFrame, config: ScenarioConfig, report: CheckReport) -> None:
    ordered = trace.sort_values(["path", "time", "position"], ascending=[True, True, False])
    grouped = ordered.groupby(["path", "time"], sort=False)
    lead_position = grouped["position"].shift(1)
    lead_class = grouped["vehicle_class"].shift(1)
    has_lead = lead_position.notna()
    if not has_lead.any():
        return
    rows = ordered[has_lead]
    gap = lead_position[has_lead] - rows["position"]
    standstill = np.where(
        lead_class[has_lead] == VehicleClass.CAV.value, config.cav_standstill, config.hdv_standstill
    )
    planned = (rows["vehicle_class"] == VehicleClass.CAV.value) & rows["mode"].isin(PLANNED_MODES)
    required = config.reaction_time * rows["velocity"] + standstill
    rear_end = planned & (gap < required - CHECK_TOLERANCE)
    collision = gap <= 0.0
    report.rear_end_violations = int(rear_end.sum())
    report.collisions = int(collision.sum())
    for _, row in rows[rear_end | collision].head(5).iterrows():
        report.violations.append(
            f"vehicle {row['vehicle_id']} too close to its predecessor at t={row['time']}"
        )


def _check_red_light(
    trace: pd.DataFrame,
    schedule: pd.DataFrame,
    config: ScenarioConfig,
    topology: PhaseTopology,
    report: CheckReport,
) -> None:
    p_tr = config.light_position
    for vehicle_id, rows in trace.groupby("vehicle_id"):
        positions = rows["position"].to_numpy()
        times = rows["time"].to_numpy()
        idx = np.flatnonzero((positions[:-1] < p_tr) & (positions[1:] >= p_tr))
        if len(idx) == 0:
            continue
        j = int(idx[0])
        t_before, t_after = times[j], times[j + 1]
        phase = topology.phase_of_path(str(rows["path"].iloc[0]))
        greens = schedule[schedule["phase"] == phase]
        green = (
            (greens["green_start"] <= t_after + CHECK_TOLERANCE)
            & (greens["green_end"] >= t_before - CHECK_TOLERANCE)
        ).any()
        if not green:
            report.red_light_crossings += 1
            report.violations.append(
                f"vehicle {vehicle_id} crossed the light on red between t={t_before} and t={t_after}"
            )


def _check_ordering(trace: pd.DataFrame, report: CheckReport) -> None:
    for vehicle_id, rows in trace.groupby("vehicle_id"):
        times = rows["time"].to_numpy()
        if np.any(np.diff(times) <= 0.0):
            report.violations.append(f"vehicle {vehicle_id} rows are not strictly time-ordered")
        if np.any(np.diff(rows["position"].to_numpy()) < -CHECK_TOLERANCE):
            report.violations.append(f"vehicle {vehicle_id} moved backwards")
        vehicle_class = str(rows["vehicle_class"].iloc[0])
        modes = rows["mode"].to_numpy()
        legal = LEGAL_TRANSITIONS.get(vehicle_class, {})
        illegal = sorted(set(modes) - set(legal))
        if illegal:
            report.violations.append(f"vehicle {vehicle_id} has illegal mode(s) {illegal}")
            continue
        for before, after in zip(modes[:-1], modes[1:]):
            if before != after and after not in legal[before]:
                report.violations.append(f"vehicle {vehicle_id} switched from {before} to {after}")
                break


def check_run(run_dir: Union[str, Path], topology: Optional[PhaseTopology] = None) -> CheckReport:
    """
    Run the invariant suite on an emitted run directory.

    Checks rear-end distances of planned CAVs, positive gaps for everyone, red-light
    crossings, per-vehicle ordering and mode transitions, and that recomputing the
    metrics from the trace reproduces metrics.json.
    """
    run = Path(run_dir)
    topology = topology or default_topology()
    config = ScenarioConfig.build(**json.loads((run / CONFIG_FILE).read_text()))
    trace = read_trace(run / TRACE_FILE)
    schedule = read_schedule(run / SCHEDULE_FILE)
    stored = json.loads((run / METRICS_FILE).read_text())

    report = CheckReport(passed=True)
    _check_ordering(trace, report)
    _check_rear_end(trace, config, report)
    _check_red_light(trace, schedule, config, topology, report)

    recomputed = compute_metrics(trace, config.zone_length, complete=stored.get("complete", True))
    stored.pop("planning", None)
    report.metrics_round_trip = recomputed.model_dump() == stored
    if not report.metrics_round_trip:
        report.violations.append("metrics recomputed from the trace differ from metrics.json")

    report.passed = not report.violations
    status = "✅" if report.passed else "❌"
    logger.info(f"{status} check of {run}: {len(report.violations)} violation(s)")
    return report
