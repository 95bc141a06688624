"""
Signal Tool for Mixed Intersection Simulator
Four-phase signal model, phase pressure and the adaptive next-cycle timing policy
"""

import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from mixed_intersection.config.scenario_config import ConfigError, SignalPolicy
from mixed_intersection.tools.trajectory_tool import VehicleClass

logger = logging.getLogger(__name__)

NUM_PHASES = 4
APPROACHES = ("N", "E", "S", "W")
MOVEMENTS = ("T", "R", "L")
SUM_TOLERANCE = 1e-9

GreenWindow = Tuple[float, float]
GreenSchedule = Tuple[GreenWindow, ...]


class SignalControlError(Exception):
    """Custom exception for signal timing operations"""
    pass


class PhaseTopology(BaseModel):
    """
    Lights, the paths each light governs and the lights each phase turns green.

    Every path is governed by exactly one light and every light belongs to exactly
    one phase, which keeps the phases conflict-free.
    """
    model_config = ConfigDict(frozen=True)

    light_paths: Dict[str, Tuple[str, ...]]
    phase_lights: Tuple[Tuple[str, ...], ...]

    @model_validator(mode="after")
    def _check(self) -> "PhaseTopology":
        if len(self.phase_lights) != NUM_PHASES:
            raise ValueError(f"expected {NUM_PHASES} phases, got {len(self.phase_lights)}")
        seen_paths: Dict[str, str] = {}
        for light, paths in self.light_paths.items():
            for path in paths:
                if path in seen_paths:
                    raise ValueError(f"path {path} governed by {seen_paths[path]} and {light}")
                seen_paths[path] = light
        phase_of: Dict[str, int] = {}
        for phase, lights in enumerate(self.phase_lights):
            for light in lights:
                if light not in self.light_paths:
                    raise ValueError(f"phase {phase} references unknown light {light}")
                if light in phase_of:
                    raise ValueError(f"light {light} appears in phases {phase_of[light]} and {phase}")
                phase_of[light] = phase
        missing = set(self.light_paths) - set(phase_of)
        if missing:
            raise ValueError(f"lights without a phase: {sorted(missing)}")
        return self

    @property
    def paths(self) -> Tuple[str, ...]:
        return tuple(p for paths in self.light_paths.values() for p in paths)

    def light_of(self, path: str) -> str:
        for light, paths in self.light_paths.items():
            if path in paths:
                return light
        raise SignalControlError(f"unknown path {path}")

    def phase_of_light(self, light: str) -> int:
        for phase, lights in enumerate(self.phase_lights):
            if light in lights:
                return phase
        raise SignalControlError(f"unknown light {light}")

    def phase_of_path(self, path: str) -> int:
        return self.phase_of_light(self.light_of(path))


def default_topology() -> PhaseTopology:
    """Four approaches with through, right and left paths; through lights also govern right turns"""
    light_paths = {}
    for approach in APPROACHES:
        light_paths[f"{approach}_through"] = (f"{approach}T", f"{approach}R")
        light_paths[f"{approach}_left"] = (f"{approach}L",)
    phase_lights = (
        ("N_through", "S_through"),
        ("N_left", "S_left"),
        ("E_through", "W_through"),
        ("E_left", "W_left"),
    )
    return PhaseTopology(light_paths=light_paths, phase_lights=phase_lights)


class PhasePlan(BaseModel):
    """Order and durations of the four phases for one cycle"""
    model_config = ConfigDict(frozen=True)

    cycle_index: int = Field(ge=0)
    cycle_start: float
    order: Tuple[int, ...]
    durations: Tuple[float, ...]
    t_cycle: float
    t_min: float
    t_update: float
    broadcast_time: float
    pressures: Optional[Tuple[float, ...]] = None

    @model_validator(mode="after")
    def _check(self) -> "PhasePlan":
        if sorted(self.order) != list(range(NUM_PHASES)):
            raise ValueError(f"phase order {self.order} is not a permutation of 0..3")
        if len(self.durations) != NUM_PHASES:
            raise ValueError(f"expected {NUM_PHASES} durations, got {len(self.durations)}")
        if abs(sum(self.durations) - self.t_cycle) > SUM_TOLERANCE:
            raise ValueError(f"durations sum to {sum(self.durations)}, not {self.t_cycle}")
        if min(self.durations) < self.t_min - SUM_TOLERANCE:
            raise ValueError(f"duration below T_min={self.t_min}: {self.durations}")
        return self

    @property
    def cycle_end(self) -> float:
        return self.cycle_start + self.t_cycle

    def durations_in_order(self) -> Tuple[float, ...]:
        return tuple(self.durations[p] for p in self.order)

    def phase_intervals(self) -> List[Tuple[int, float, float]]:
        """(phase, green start, green end) in cycle order"""
        intervals = []
        start = self.cycle_start
        for position, phase in enumerate(self.order):
            end = self.cycle_end if position == NUM_PHASES - 1 else start + self.durations[phase]
            intervals.append((phase, start, end))
            start = end
        return intervals


class VehicleSnapshot(BaseModel):
    """What the pressure count needs to know about one in-zone vehicle"""
    model_config = ConfigDict(frozen=True)

    path: str
    vehicle_class: VehicleClass
    standby: bool = False
    follows_idm: bool = False
    stopped: bool = False
    predicted_stop: bool = False
    past_light: bool = False

    @property
    def contributes(self) -> bool:
        if self.past_light:
            return False
        if self.standby:
            return True
        return self.follows_idm and (self.stopped or self.predicted_stop)


def pressure(snapshot: Sequence[VehicleSnapshot], topology: PhaseTopology) -> List[float]:
    """
    Pressure of each phase: standby CAVs plus stopped or stop-predicted HDVs on the
    paths whose lights that phase turns green.
    """
    per_path: Dict[str, int] = {path: 0 for path in topology.paths}
    for vehicle in snapshot:
        if vehicle.contributes:
            per_path[vehicle.path] = per_path.get(vehicle.path, 0) + 1
    return [
        float(sum(per_path[z] for light in lights for z in topology.light_paths[light]))
        for lights in topology.phase_lights
    ]


def next_cycle_plan(
    q: Sequence[float],
    t_cycle: float,
    t_min: float,
    cycle_index: int = 0,
    cycle_start: float = 0.0,
    t_update: Optional[float] = None,
    broadcast_time: float = 0.0,
) -> PhasePlan:
    """
    Order phases by descending pressure and split the time above the floor in
    proportion to pressure.

    Args:
        q: Pressure per phase
        t_cycle: Cycle length (s)
        t_min: Minimum phase duration (s)
        cycle_index: Index of the planned cycle
        cycle_start: Start time of the planned cycle (s)
        t_update: Broadcast offset within the cycle (s); defaults to t_cycle/2
        broadcast_time: When the plan becomes known (s)

    Returns:
        PhasePlan for the next cycle
    """
    if t_cycle <= NUM_PHASES * t_min:
        raise ConfigError("t_cycle", f"t_cycle={t_cycle} must exceed 4*t_min={NUM_PHASES * t_min}")
    if len(q) != NUM_PHASES:
        raise SignalControlError(f"expected {NUM_PHASES} pressures, got {len(q)}")
    order = tuple(sorted(range(NUM_PHASES), key=lambda p: (-q[p], p)))
    t_remain = t_cycle - NUM_PHASES * t_min
    total = float(sum(q))
    if total <= 0.0:
        shares = [t_remain / NUM_PHASES] * NUM_PHASES
    else:
        shares = [q[p] / total * t_remain for p in range(NUM_PHASES)]
    durations = tuple(t_min + share for share in shares)
    return PhasePlan(
        cycle_index=cycle_index,
        cycle_start=cycle_start,
        order=order,
        durations=durations,
        t_cycle=t_cycle,
        t_min=t_min,
        t_update=t_cycle / 2.0 if t_update is None else t_update,
        broadcast_time=broadcast_time,
        pressures=tuple(float(x) for x in q),
    )


def _merge(windows: List[GreenWindow]) -> List[GreenWindow]:
    merged: List[GreenWindow] = []
    for g1, g2 in sorted(windows):
        if merged and g1 <= merged[-1][1] + SUM_TOLERANCE:
            merged[-1] = (merged[-1][0], max(merged[-1][1], g2))
        else:
            merged.append((g1, g2))
    return merged


class SignalController:
    """
    Sequential signal state machine.

    The plan history is append-only: the next cycle is fixed and broadcast at
    T_update of the current one, and nothing already broadcast is changed.
    """

    def __init__(
        self,
        topology: PhaseTopology,
        policy: SignalPolicy,
        t_cycle: float,
        t_min: float,
        t_update: Optional[float] = None,
        first_order: Sequence[int] = (0, 1, 2, 3),
        first_durations: Optional[Sequence[float]] = None,
        fixed_durations: Optional[Sequence[float]] = None,
    ):
        if t_cycle <= NUM_PHASES * t_min:
            raise ConfigError("t_cycle", f"t_cycle={t_cycle} must exceed 4*t_min={NUM_PHASES * t_min}")
        self.topology = topology
        self.policy = policy
        self.t_cycle = t_cycle
        self.t_min = t_min
        self.t_update = t_cycle / 2.0 if t_update is None else t_update
        self.first_order = tuple(first_order)
        equal = tuple([t_cycle / NUM_PHASES] * NUM_PHASES)
        self.fixed_durations = tuple(fixed_durations) if fixed_durations else equal
        first = tuple(first_durations) if first_durations else equal
        self.plans: List[PhasePlan] = [self._static_plan(0, 0.0, first, 0.0)]

    def _static_plan(
        self, index: int, start: float, durations: Tuple[float, ...], broadcast: float
    ) -> PhasePlan:
        return PhasePlan(
            cycle_index=index,
            cycle_start=start,
            order=self.first_order,
            durations=durations,
            t_cycle=self.t_cycle,
            t_min=self.t_min,
            t_update=self.t_update,
            broadcast_time=broadcast,
        )

    @property
    def latest(self) -> PhasePlan:
        return self.plans[-1]

    def update(self, t: float, snapshot: Callable[[], Sequence[VehicleSnapshot]]) -> bool:
        """
        Fix and broadcast the next cycle once T_update of the latest cycle is reached.

        Returns:
            True when a new plan was broadcast at this call
        """
        latest = self.latest
        if t < latest.cycle_start + self.t_update - SUM_TOLERANCE:
            return False
        index, start = latest.cycle_index + 1, latest.cycle_end
        if self.policy == SignalPolicy.ADAPTIVE:
            q = pressure(snapshot(), self.topology)
            plan = next_cycle_plan(
                q,
                self.t_cycle,
                self.t_min,
                cycle_index=index,
                cycle_start=start,
                t_update=self.t_update,
                broadcast_time=t,
            )
            logger.info(
                f"🚦 cycle {index} broadcast at t={t:.2f}: pressures={q}, "
                f"order={list(plan.order)}, durations={[round(d, 3) for d in plan.durations]}"
            )
        else:
            plan = self._static_plan(index, start, self.fixed_durations, t)
            logger.debug(f"🚦 fixed cycle {index} broadcast at t={t:.2f}")
        self.plans.append(plan)
        return True

    def plan_at(self, t: float) -> Optional[PhasePlan]:
        for plan in self.plans:
            if plan.cycle_start <= t < plan.cycle_end:
                return plan
        return None

    def active_phase(self, t: float) -> int:
        """Phase green at time t, or -1 beyond the known schedule"""
        plan = self.plan_at(t)
        if plan is None:
            return -1
        for phase, start, end in plan.phase_intervals():
            if start <= t < end:
                return phase
        return -1

    def light_windows(self, light: str, t_from: float = float("-inf")) -> GreenSchedule:
        """Merged green windows of one light across every broadcast cycle, ending after t_from"""
        phase = self.topology.phase_of_light(light)
        raw = [
            (start, end)
            for plan in self.plans
            for p, start, end in plan.phase_intervals()
            if p == phase
        ]
        return tuple(w for w in _merge(raw) if w[1] > t_from)

    def green_windows(self, path: str, t_from: float = float("-inf")) -> GreenSchedule:
        return self.light_windows(self.topology.light_of(path), t_from)

    def is_green(self, path: str, t: float) -> bool:
        return self.active_phase(t) == self.topology.phase_of_path(path)

    def schedule_rows(self) -> List[Dict[str, float]]:
        rows = []
        for plan in self.plans:
            for position, (phase, start, end) in enumerate(plan.phase_intervals()):
                rows.append(
                    {
                        "cycle_index": plan.cycle_index,
                        "cycle_start": plan.cycle_start,
                        "position": position,
                        "phase": phase,
                        "green_start": start,
                        "green_end": end,
                        "broadcast_time": plan.broadcast_time,
                    }
                )
        return rows
