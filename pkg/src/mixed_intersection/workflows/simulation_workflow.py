"""
Simulation Workflow for Mixed Intersection Simulator
Deterministic discrete-time engine: arrivals, signal updates, CAV planning, HDV car-following
"""

import logging
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from mixed_intersection.config.scenario_config import ScenarioConfig
from mixed_intersection.tools.cav_planner_tool import PlanningContext, rear_end_ok
from mixed_intersection.tools.hdv_tool import (
    STOP_SPEED,
    CollisionStateError,
    DeviationResult,
    HdvContext,
    HdvPrediction,
    IdmParams,
    LightPerception,
    deviation_check,
    idm_step,
    light_target,
    predict,
)
from mixed_intersection.tools.metrics_tool import MetricsReport, compute_metrics
from mixed_intersection.tools.signal_tool import (
    GreenSchedule,
    PhaseTopology,
    SignalController,
    VehicleSnapshot,
    default_topology,
)
from mixed_intersection.tools.standby_tool import (
    ReplanTrigger,
    StandbyMonitor,
    StandbyPlan,
    replanning_trigger,
)
from mixed_intersection.tools.trace_tool import (
    PLANNED_MODES,
    SafetyViolationError,
    SimulationError,
    TraceFormatError,
    VehicleMode,
    emit,
    records_to_frame,
)
from mixed_intersection.tools.trajectory_tool import (
    Trajectory,
    VehicleClass,
    VehicleInfo,
    VehicleState,
)
from mixed_intersection.workflows.decision_cascade import CascadeOutcome, plan_cav, refine_plan

logger = logging.getLogger(__name__)

SAFETY_TOLERANCE = 1e-6

__all__ = [
    "Arrival",
    "CoordinatorStore",
    "SimulationEngine",
    "SimulationResult",
    "SafetyViolationError",
    "SimulationError",
    "TraceFormatError",
    "generate_arrivals",
    "run",
    "run_to_directory",
]


class Arrival(BaseModel):
    """One vehicle entering the control zone"""
    model_config = ConfigDict(frozen=True)

    time: float = Field(ge=0.0)
    path: str
    vehicle_class: VehicleClass
    speed: float = Field(ge=0.0)


def generate_arrivals(config: ScenarioConfig, topology: PhaseTopology) -> List[Arrival]:
    """
    Per-path Poisson arrivals; the first vehicle_count of the merged stream are kept.

    Classes are drawn with the CAV penetration rate and entry speeds uniformly.
    """
    rng = np.random.default_rng(config.seed)
    n = config.vehicle_count
    if n == 0:
        return []
    candidates: List[Tuple[float, int, str]] = []
    for index, path in enumerate(topology.paths):
        times = np.cumsum(rng.exponential(1.0 / config.arrival_rate, size=n))
        candidates.extend((float(t), index, path) for t in times)
    candidates.sort()
    chosen = candidates[:n]
    is_cav = rng.random(n) < config.penetration
    speeds = rng.uniform(config.entry_speed_min, config.entry_speed_max, size=n)
    return [
        Arrival(
            time=t,
            path=path,
            vehicle_class=VehicleClass.CAV if cav else VehicleClass.HDV,
            speed=float(speed),
        )
        for (t, _, path), cav, speed in zip(chosen, is_cav, speeds)
    ]


class VehicleAgent(BaseModel):
    """Live state of one in-zone vehicle and whatever it has committed to the store"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    info: VehicleInfo
    position: float
    velocity: float
    acceleration: float = 0.0
    mode: VehicleMode = VehicleMode.IDM
    trajectory: Optional[Trajectory] = None
    standby: Optional[StandbyPlan] = None
    prediction: Optional[HdvPrediction] = None
    perception: LightPerception = Field(default_factory=LightPerception)
    monitor: StandbyMonitor = Field(default_factory=StandbyMonitor)
    next_monitor: float = 0.0
    next_retry: float = 0.0
    dirty: bool = False
    plan_expired: bool = False

    @property
    def vehicle_id(self) -> int:
        return self.info.vehicle_id

    @property
    def is_cav(self) -> bool:
        return self.info.vehicle_class == VehicleClass.CAV

    @property
    def follows_idm(self) -> bool:
        return self.mode == VehicleMode.IDM

    @property
    def planned(self) -> bool:
        return self.is_cav and self.mode.value in PLANNED_MODES

    def state(self, t: float) -> VehicleState:
        return VehicleState(
            position=self.position, velocity=self.velocity, acceleration=self.acceleration, time=t
        )

    def motion(self) -> Any:
        return self.prediction if self.follows_idm else self.trajectory


class CoordinatorStore:
    """
    Intersection-side store: committed plans and predictions, and per-path FIFO order.
    """

    def __init__(self, controller: SignalController):
        self.controller = controller
        self.vehicles: Dict[int, VehicleAgent] = {}
        self.lanes: Dict[str, List[int]] = {}

    def add(self, agent: VehicleAgent) -> None:
        self.vehicles[agent.vehicle_id] = agent
        self.lanes.setdefault(agent.info.path, []).append(agent.vehicle_id)

    def remove(self, agent: VehicleAgent) -> None:
        self.lanes[agent.info.path].remove(agent.vehicle_id)
        del self.vehicles[agent.vehicle_id]

    def in_zone(self) -> List[VehicleAgent]:
        """Every in-zone vehicle in entry order, ties by id"""
        return sorted(
            self.vehicles.values(), key=lambda a: (a.info.entry_time, a.vehicle_id)
        )

    def lane(self, path: str) -> List[VehicleAgent]:
        return [self.vehicles[i] for i in self.lanes.get(path, [])]

    def predecessor(self, agent: VehicleAgent) -> Optional[VehicleAgent]:
        lane = self.lanes[agent.info.path]
        index = lane.index(agent.vehicle_id)
        return self.vehicles[lane[index - 1]] if index > 0 else None

    def follower(self, agent: VehicleAgent) -> Optional[VehicleAgent]:
        lane = self.lanes[agent.info.path]
        index = lane.index(agent.vehicle_id)
        return self.vehicles[lane[index + 1]] if index + 1 < len(lane) else None

    def last_on(self, path: str) -> Optional[VehicleAgent]:
        lane = self.lanes.get(path, [])
        return self.vehicles[lane[-1]] if lane else None

    def snapshot(self, p_tr: float) -> List[VehicleSnapshot]:
        return [
            VehicleSnapshot(
                path=a.info.path,
                vehicle_class=a.info.vehicle_class,
                standby=a.mode == VehicleMode.STANDBY,
                follows_idm=a.follows_idm,
                stopped=a.velocity < STOP_SPEED,
                predicted_stop=bool(a.prediction is not None and a.prediction.predicted_stop),
                past_light=a.position >= p_tr,
            )
            for a in self.in_zone()
        ]


class SimulationResult(BaseModel):
    """Everything a finished (or cut-off) run produced"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    metrics: MetricsReport
    trace: pd.DataFrame
    schedule_rows: List[Dict[str, Any]]
    stats: Dict[str, Any]
    complete: bool


class SimulationEngine:
    """
    Sequential, deterministic engine advanced in fixed steps.

    Each step: signal update and broadcast, arrivals, per-vehicle planning in entry
    order, the rear-end safety assertion, recording, then integration.
    """

    def __init__(
        self,
        config: ScenarioConfig,
        arrivals: Optional[Sequence[Arrival]] = None,
        topology: Optional[PhaseTopology] = None,
        dump_dir: Optional[Union[str, Path]] = None,
    ):
        self.config = config
        self.topology = topology or default_topology()
        self.controller = SignalController(
            self.topology,
            config.policy,
            config.t_cycle,
            config.t_min,
            t_update=config.resolved_t_update,
            first_order=config.first_cycle_order,
            first_durations=config.first_cycle_durations,
            fixed_durations=config.fixed_durations,
        )
        self.store = CoordinatorStore(self.controller)
        self.bounds = config.bounds
        self.hdv_params = config.idm_params
        self.cav_idm_params: IdmParams = self.hdv_params.model_copy(
            update={"standstill": config.cav_standstill}
        )
        self.p_tr = config.light_position
        self.pf = config.zone_length
        if arrivals is None:
            arrivals = generate_arrivals(config, self.topology)
        ordered = sorted(enumerate(arrivals), key=lambda item: (item[1].time, item[0]))
        self.pending: List[Tuple[int, Arrival]] = list(ordered)
        self.step_index = 0
        self.rows: List[tuple] = []
        self.noise_rng = np.random.default_rng([config.seed, 1])
        self.dump_dir = Path(dump_dir) if dump_dir is not None else None
        self._windows: Dict[str, GreenSchedule] = {}
        self.stats: Dict[str, Any] = {
            "plans_committed": 0,
            "standby_entries": 0,
            "standby_exits": 0,
            "refines": 0,
            "idm_fallbacks": 0,
            "hdv_predictions": 0,
            "truncated_predictions": 0,
            "deviation_replans": 0,
            "deferred_spawns": 0,
            "safety_breaches": 0,
            "broadcasts": 0,
        }

    @property
    def time(self) -> float:
        return self.step_index * self.config.step

    @property
    def done(self) -> bool:
        return not self.pending and not self.store.vehicles

    def windows(self, path: str, t: float) -> GreenSchedule:
        if path not in self._windows:
            self._windows[path] = self.controller.green_windows(path, t_from=t)
        return self._windows[path]

    # ---- commits -------------------------------------------------------

    def _mark_follower(self, agent: VehicleAgent) -> None:
        follower = self.store.follower(agent)
        if follower is not None:
            follower.dirty = True

    def _predict(self, agent: VehicleAgent, t: float) -> None:
        leader = self.store.predecessor(agent)
        params = self.cav_idm_params if agent.is_cav else self.hdv_params
        ctx = HdvContext(
            leader=None if leader is None else leader.motion(),
            green_windows=self.windows(agent.info.path, t),
            light_position=self.p_tr,
            exit_position=self.pf,
            amber_time=self.config.hdv_amber_time,
        )
        agent.prediction = predict(
            agent.state(t),
            params,
            ctx,
            horizon=self.config.prediction_horizon,
            step=self.config.prediction_step,
            perception=agent.perception,
            threshold=self.config.deviation_threshold,
        )
        self.stats["hdv_predictions"] += 1
        if agent.prediction.truncated:
            self.stats["truncated_predictions"] += 1
        self._mark_follower(agent)

    def _context(self, agent: VehicleAgent, t: float) -> Tuple[PlanningContext, Optional[float]]:
        pred = self.store.predecessor(agent)
        fields: Dict[str, Any] = {}
        stop_position = None
        if pred is not None:
            fields["predecessor"] = pred.motion()
            fields["standstill"] = pred.info.standstill
            if pred.position < self.p_tr:
                if pred.follows_idm and pred.prediction is not None:
                    pr = pred.prediction
                    fields["predecessor_light_time"] = pr.light_crossing_time
                    fields["predecessor_light_speed"] = pr.light_crossing_speed
                    stopping = pr.predicted_stop or pr.light_crossing_time is None
                    fields["predecessor_stopping"] = stopping
                    if stopping:
                        waiting = (pr.velocities < STOP_SPEED) & (pr.positions < self.p_tr)
                        stop_position = (
                            float(pr.positions[waiting].max()) if waiting.any() else pred.position
                        )
                elif pred.mode == VehicleMode.STANDBY and pred.standby is not None:
                    fields["predecessor_stopping"] = True
                    stop_position = pred.standby.stop_position
                elif pred.trajectory is not None and pred.trajectory.light_crossing_time is not None:
                    t_tr = pred.trajectory.light_crossing_time
                    fields["predecessor_light_time"] = t_tr
                    fields["predecessor_light_speed"] = pred.trajectory.state_at(t_tr).velocity
        ctx = PlanningContext(
            bounds=self.bounds,
            green_windows=self.windows(agent.info.path, t),
            light_position=self.p_tr,
            delta_t=self.config.delta_t,
            check_grid=self.config.check_grid,
            t_cap=self.config.t_cap,
            v_des=self.config.v_des,
            **fields,
        )
        return ctx, stop_position

    def _commit(self, agent: VehicleAgent, outcome: CascadeOutcome, t: float) -> None:
        agent.mode = outcome.mode
        agent.plan_expired = False
        if outcome.mode == VehicleMode.IDM:
            agent.trajectory = None
            agent.standby = None
            agent.next_retry = t + self.config.replan_backoff
            self.stats["idm_fallbacks"] += 1
            logger.warning(f"⚠️ CAV {agent.vehicle_id} follows with idm at t={t:.2f}")
            self._predict(agent, t)
        else:
            agent.trajectory = outcome.trajectory
            agent.standby = outcome.standby
            agent.prediction = None
            if outcome.mode == VehicleMode.STANDBY:
                agent.monitor.enter_standby()
                self.stats["standby_entries"] += 1
            else:
                agent.monitor.track_plan(outcome.clipped_green_start)
            agent.next_monitor = t + self.config.monitor_interval
            self._mark_follower(agent)
        self.stats["plans_committed"] += 1

    def _replan(self, agent: VehicleAgent, t: float) -> CascadeOutcome:
        ctx, stop_position = self._context(agent, t)
        return plan_cav(ctx, agent.state(t), self.pf, stop_position)

    # ---- per-step phases -----------------------------------------------

    def _spawn(self, t: float) -> None:
        remaining = []
        blocked_paths = set()
        for vehicle_id, arrival in self.pending:
            if arrival.time > t + 1e-12:
                remaining.append((vehicle_id, arrival))
                continue
            last = self.store.last_on(arrival.path)
            needed = self.bounds.reaction_time * arrival.speed + (
                last.info.standstill if last is not None else 0.0
            )
            if arrival.path in blocked_paths or (last is not None and last.position < needed):
                if arrival.path not in blocked_paths:
                    self.stats["deferred_spawns"] += 1
                blocked_paths.add(arrival.path)
                remaining.append((vehicle_id, arrival))
                continue
            is_cav = arrival.vehicle_class == VehicleClass.CAV
            agent = VehicleAgent(
                info=VehicleInfo(
                    vehicle_id=vehicle_id,
                    vehicle_class=arrival.vehicle_class,
                    path=arrival.path,
                    entry_time=t,
                    entry_speed=arrival.speed,
                    standstill=self.config.cav_standstill if is_cav else self.config.hdv_standstill,
                ),
                position=0.0,
                velocity=arrival.speed,
            )
            self.store.add(agent)
            if is_cav:
                self._commit(agent, self._replan(agent, t), t)
            else:
                self._predict(agent, t)
            logger.debug(f"vehicle {vehicle_id} ({arrival.vehicle_class.value}) entered {arrival.path} at t={t:.2f}")
        self.pending = remaining

    def _update_cav(self, agent: VehicleAgent, t: float) -> None:
        if agent.follows_idm:
            if self._prediction_stale(agent, t):
                self._predict(agent, t)
            if t >= agent.next_retry:
                outcome = self._replan(agent, t)
                if outcome.mode != VehicleMode.IDM:
                    self._commit(agent, outcome, t)
                else:
                    agent.next_retry = t + self.config.replan_backoff
            return

        if agent.plan_expired:
            self._commit(agent, self._replan(agent, t), t)
            return
        if agent.dirty:
            ctx, _ = self._context(agent, t)
            if not rear_end_ok(agent.trajectory, ctx, t_from=t):
                logger.debug(f"CAV {agent.vehicle_id} replans after a predecessor change at t={t:.2f}")
                self._commit(agent, self._replan(agent, t), t)
                return

        watching = agent.mode == VehicleMode.STANDBY or (
            agent.monitor.clipped_green_start is not None and not agent.monitor.refine_used
        )
        if not watching or t < agent.next_monitor or agent.position >= self.p_tr:
            return
        trigger = replanning_trigger(
            agent.monitor,
            agent.state(t),
            self.windows(agent.info.path, t),
            self.p_tr,
            self.pf,
            self.bounds,
            self.config.t_cap,
        )
        agent.next_monitor = t + self.config.monitor_interval
        if trigger == ReplanTrigger.EXIT_STANDBY:
            outcome = self._replan(agent, t)
            if outcome.mode in (VehicleMode.UNCONSTRAINED, VehicleMode.CONSTRAINED):
                logger.debug(f"CAV {agent.vehicle_id} leaves standby at t={t:.2f}")
                self.stats["standby_exits"] += 1
                self._commit(agent, outcome, t)
            else:
                agent.next_monitor = t + self.config.replan_backoff
        elif trigger == ReplanTrigger.REFINE:
            agent.monitor.refine_used = True
            ctx, _ = self._context(agent, t)
            refined = refine_plan(
                ctx, agent.state(t), self.pf, agent.trajectory, agent.monitor.clipped_green_start
            )
            if refined is not None:
                self.stats["refines"] += 1
                agent.trajectory = refined
                self._mark_follower(agent)

    def _prediction_stale(self, agent: VehicleAgent, t: float) -> bool:
        prediction = agent.prediction
        return (
            prediction is None
            or agent.dirty
            or t >= prediction.t_start + 0.5 * self.config.prediction_horizon
            or (t >= prediction.t_end and not prediction.exits)
        )

    def _update_hdv(self, agent: VehicleAgent, t: float) -> None:
        if self._prediction_stale(agent, t):
            self._predict(agent, t)
            return
        prediction = agent.prediction
        if deviation_check(prediction, agent.state(t)) == DeviationResult.REPLAN_FOLLOWERS:
            self.stats["deviation_replans"] += 1
            self._predict(agent, t)

    def _assert_safety(self, t: float) -> None:
        for path in list(self.store.lanes):
            lane = self.store.lane(path)
            for pred, follower in zip(lane, lane[1:]):
                gap = pred.position - follower.position
                if follower.planned:
                    required = self.bounds.reaction_time * follower.velocity + pred.info.standstill
                    breached = gap < required - SAFETY_TOLERANCE
                else:
                    breached = gap <= 0.0
                if not breached:
                    continue
                self.stats["safety_breaches"] += 1
                message = (
                    f"rear-end breach at t={t:.2f} on {path}: vehicle {follower.vehicle_id} "
                    f"({follower.mode.value}) is {gap:.4f} m behind vehicle {pred.vehicle_id}"
                )
                if self.config.strict_safety:
                    raise SafetyViolationError(message, self._dump())
                logger.warning(f"⚠️ {message}")

    def _dump(self) -> str:
        target = self.dump_dir or Path(tempfile.mkdtemp(prefix="mixed_intersection_dump_"))
        target.mkdir(parents=True, exist_ok=True)
        path = target / "trace_dump.csv"
        records_to_frame(self.rows).to_csv(path, index=False, lineterminator="\n")
        logger.error(f"❌ safety breach, trace dumped to {path}")
        return str(path)

    def _advance_idm(
        self, agent: VehicleAgent, t: float, dt: float, leaders: Dict[int, Tuple[float, float]]
    ) -> Tuple[float, float, float]:
        pred = self.store.predecessor(agent)
        params = self.cav_idm_params if agent.is_cav else self.hdv_params
        ctx = HdvContext(
            green_windows=self.windows(agent.info.path, t),
            light_position=self.p_tr,
            exit_position=self.pf,
            amber_time=self.config.hdv_amber_time,
        )
        light = light_target(agent.perception, t, agent.position, agent.velocity, ctx, params)
        lead_p, lead_v = leaders[pred.vehicle_id] if pred is not None else (None, None)
        try:
            new_p, new_v, u = idm_step(
                agent.position, agent.velocity, dt, params, lead_p, lead_v, light
            )
        except CollisionStateError as e:
            self.stats["safety_breaches"] += 1
            message = f"vehicle {agent.vehicle_id} collided at t={t:.2f}: {e}"
            if self.config.strict_safety:
                raise SafetyViolationError(message, self._dump()) from e
            logger.warning(f"⚠️ {message}")
            return agent.position, 0.0, 0.0
        if not agent.is_cav and self.config.hdv_noise_std > 0.0:
            noise = float(self.noise_rng.normal(0.0, self.config.hdv_noise_std))
            new_v = max(new_v + noise * dt, 0.0)
            new_p = max(new_p + 0.5 * noise * dt * dt, agent.position)
            u += noise
        return new_p, new_v, u

    def step(self) -> "SimulationEngine":
        """Advance the engine by one step"""
        dt = self.config.step
        t = self.time
        self._windows = {}

        if self.controller.update(t, lambda: self.store.snapshot(self.p_tr)):
            self.stats["broadcasts"] += 1
            self._windows = {}
            for agent in self.store.vehicles.values():
                if agent.follows_idm:
                    agent.dirty = True

        self._spawn(t)

        for agent in self.store.in_zone():
            if agent.is_cav:
                self._update_cav(agent, t)
            else:
                self._update_hdv(agent, t)
            agent.dirty = False

        self._assert_safety(t)

        phase = self.controller.active_phase(t)
        leaders = {a.vehicle_id: (a.position, a.velocity) for a in self.store.vehicles.values()}
        updates: List[Tuple[VehicleAgent, float, float, float, Optional[VehicleState]]] = []
        for agent in self.store.in_zone():
            exit_state = None
            if agent.follows_idm:
                new_p, new_v, u = self._advance_idm(agent, t, dt, leaders)
                if new_p >= self.pf:
                    frac = (self.pf - agent.position) / max(new_p - agent.position, 1e-12)
                    exit_state = VehicleState(
                        position=self.pf,
                        velocity=agent.velocity + frac * (new_v - agent.velocity),
                        acceleration=u,
                        time=t + frac * dt,
                    )
            else:
                traj = agent.trajectory
                u = traj.state_at(t).acceleration
                t_next = t + dt
                if traj.exit_time is not None and t_next >= traj.exit_time - 1e-12:
                    exit_state = traj.state_at(traj.exit_time)
                    new_p, new_v = exit_state.position, exit_state.velocity
                elif t_next > traj.t_end:
                    end = traj.end_state
                    new_p, new_v = end.position + end.velocity * (t_next - traj.t_end), end.velocity
                    agent.plan_expired = True
                else:
                    nxt = traj.state_at(t_next)
                    new_p, new_v = nxt.position, nxt.velocity
            agent.acceleration = u
            updates.append((agent, new_p, new_v, u, exit_state))

        for agent, *_ in updates:
            self.rows.append(
                (
                    t,
                    agent.vehicle_id,
                    agent.info.vehicle_class.value,
                    agent.info.path,
                    agent.position,
                    agent.velocity,
                    agent.acceleration,
                    agent.mode.value,
                    phase,
                )
            )

        for agent, new_p, new_v, u, exit_state in updates:
            if exit_state is not None:
                self.rows.append(
                    (
                        exit_state.time,
                        agent.vehicle_id,
                        agent.info.vehicle_class.value,
                        agent.info.path,
                        exit_state.position,
                        exit_state.velocity,
                        exit_state.acceleration,
                        agent.mode.value,
                        self.controller.active_phase(exit_state.time),
                    )
                )
                self.store.remove(agent)
                continue
            agent.position, agent.velocity = new_p, new_v

        self.step_index += 1
        return self


def run(
    config: ScenarioConfig,
    arrivals: Optional[Sequence[Arrival]] = None,
    topology: Optional[PhaseTopology] = None,
    dump_dir: Optional[Union[str, Path]] = None,
) -> SimulationResult:
    """
    Run a scenario until every vehicle has left or the step cap is hit.

    Returns:
        SimulationResult; complete=False when the step cap cut the run short
    """
    engine = SimulationEngine(config, arrivals=arrivals, topology=topology, dump_dir=dump_dir)
    max_steps = config.resolved_max_steps
    logger.info(
        f"🚀 Running {len(engine.pending)} vehicles, penetration={config.penetration}, "
        f"policy={config.policy.value}, T_cycle={config.t_cycle}, seed={config.seed}"
    )
    while not engine.done and engine.step_index < max_steps:
        engine.step()
    complete = engine.done
    if not complete:
        logger.warning(
            f"⚠️ run stopped after {engine.step_index} steps with "
            f"{len(engine.store.vehicles) + len(engine.pending)} vehicles unfinished"
        )
    trace = records_to_frame(engine.rows)
    metrics = compute_metrics(trace, config.zone_length, complete=complete)
    logger.info(
        f"✅ Run finished at t={engine.time:.2f}: {metrics.exited_count}/{metrics.vehicle_count} exited, "
        f"mean travel time {metrics.mean_travel_time}"
    )
    return SimulationResult(
        metrics=metrics,
        trace=trace,
        schedule_rows=engine.controller.schedule_rows(),
        stats=dict(engine.stats, steps=engine.step_index),
        complete=complete,
    )


def run_to_directory(
    config: ScenarioConfig,
    out_dir: Union[str, Path],
    arrivals: Optional[Sequence[Arrival]] = None,
) -> Tuple[SimulationResult, Dict[str, str]]:
    """Run a scenario and emit its artifacts into out_dir"""
    result = run(config, arrivals=arrivals, dump_dir=out_dir)
    paths = emit(
        result.trace,
        result.schedule_rows,
        result.metrics,
        config,
        out_dir,
        planning_stats=result.stats,
    )
    return result, paths
