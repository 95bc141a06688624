"""
Standby Tool for Mixed Intersection Simulator
Latest stopping time, standby trajectories and the event-triggered replanning monitor
"""

import logging
import math
from enum import Enum
from typing import Optional, Sequence

from pydantic import BaseModel, ConfigDict

from mixed_intersection.tools.cav_planner_tool import (
    GreenWindow,
    PlannerError,
    PlanningContext,
    feasible_exit_range,
    rear_end_ok,
)
from mixed_intersection.tools.signal_feasibility_tool import crossing_window
from mixed_intersection.tools.trajectory_tool import (
    Bounds,
    ConstAccelSegment,
    CubicSegment,
    Trajectory,
    VehicleState,
)

logger = logging.getLogger(__name__)

HOLD_SPEED = 0.01
PULLBACK_STEP = 1.0
MAX_PULLBACKS = 10
MIN_STOP_DISTANCE = 1e-3


class StandbyError(Exception):
    """Custom exception for standby planning"""
    pass


class DegenerateStandbyError(StandbyError):
    """Raised when no finite latest stopping time exists (vehicle already at rest)"""
    pass


class StandbyConstraintError(StandbyError):
    """Raised when a stop arc would need more braking than u_min allows"""
    pass


class ReplanTrigger(str, Enum):
    NONE = "none"
    EXIT_STANDBY = "exit_standby"
    REFINE = "refine"


class StandbyPlan(BaseModel):
    """Committed stop: when and where the vehicle comes to rest, and how"""
    model_config = ConfigDict(frozen=True)

    stop_time: float
    stop_position: float
    trajectory: Trajectory
    emergency: bool = False


class StandbyMonitor(BaseModel):
    """Per-vehicle replanning state, mutated only by the owning vehicle's update"""

    in_standby: bool = False
    clipped_green_start: Optional[float] = None
    refine_used: bool = False
    window_start: Optional[float] = None
    window_end: Optional[float] = None

    def enter_standby(self) -> None:
        self.in_standby = True
        self.clipped_green_start = None
        self.refine_used = False

    def track_plan(self, clipped_green_start: Optional[float]) -> None:
        """Start monitoring a freshly committed unconstrained or constrained plan"""
        self.in_standby = False
        self.clipped_green_start = clipped_green_start
        self.refine_used = False


def latest_stop_time(v0: float, distance: float, u_min: float) -> float:
    """
    Latest time at which the vehicle can still come to rest exactly at the stop position.

    Args:
        v0: Current speed (m/s)
        distance: Distance to the stop position (m)
        u_min: Maximum deceleration (negative, m/s^2)

    Returns:
        Stopping time relative to now (s)
    """
    if v0 <= 0.0:
        raise DegenerateStandbyError("vehicle at rest has no finite latest stopping time")
    if distance <= 0.0 or u_min >= 0.0:
        raise StandbyError(f"invalid stop request: distance={distance}, u_min={u_min}")
    t_star = 3.0 * distance / v0
    t_b = (-v0 + math.sqrt(v0 * v0 - 6.0 * u_min * distance)) / (-u_min)
    return t_star if t_star >= t_b else t_b


def critical_acceleration(v0: float, distance: float) -> float:
    """Initial acceleration of the latest stop cubic"""
    return -2.0 * v0 * v0 / (3.0 * distance)


def standby_trajectory(
    state: VehicleState,
    stop_position: float,
    stop_time: float,
    bounds: Bounds,
    hold_until: Optional[float] = None,
) -> Trajectory:
    """
    Stop cubic with p(t0)=p0, v(t0)=v0, p(t_s)=stop_position, v(t_s)=0, then a hold.

    Args:
        state: Current vehicle state
        stop_position: Where to stop (m)
        stop_time: Absolute stopping time (s)
        bounds: Speed and control limits
        hold_until: End of the hold segment; defaults to stop_time + 120 s

    Returns:
        Trajectory of the stop arc followed by a zero-speed hold
    """
    T = stop_time - state.time
    if T <= 0.0:
        raise StandbyError(f"stop time {stop_time} is not after t={state.time}")
    D, v0 = stop_position - state.position, state.velocity
    stop_arc = CubicSegment(
        a=(v0 * T - 2.0 * D) / T ** 3,
        b=(3.0 * D - 2.0 * v0 * T) / T ** 2,
        c=v0,
        d=state.position,
        t_start=state.time,
        t_end=stop_time,
    )
    u_lo, _ = stop_arc.acceleration_range()
    if u_lo < bounds.u_min - 1e-6:
        raise StandbyConstraintError(
            f"stop arc needs u={u_lo:.3f} below u_min={bounds.u_min} "
            f"(v0={state.velocity:.3f}, distance={stop_position - state.position:.3f})"
        )
    hold_end = hold_until if hold_until is not None else stop_time + 120.0
    hold = ConstAccelSegment(
        acceleration=0.0,
        p_start=stop_position,
        v_start=0.0,
        t_start=stop_time,
        t_end=max(hold_end, stop_time + 1e-3),
    )
    return Trajectory(segments=(stop_arc, hold))


def brake_to_stop(
    state: VehicleState, deceleration: float, hold_until: float
) -> Trajectory:
    """Constant-deceleration stop followed by a hold"""
    if deceleration >= 0.0:
        raise StandbyError(f"braking needs a negative deceleration, got {deceleration}")
    t_stop = state.time + state.velocity / -deceleration
    p_stop = state.position + state.velocity ** 2 / (-2.0 * deceleration)
    segments = []
    if t_stop - state.time > 1e-9:
        segments.append(
            ConstAccelSegment(
                acceleration=deceleration,
                p_start=state.position,
                v_start=state.velocity,
                t_start=state.time,
                t_end=t_stop,
            )
        )
    segments.append(
        ConstAccelSegment(
            acceleration=0.0,
            p_start=p_stop,
            v_start=0.0,
            t_start=t_stop,
            t_end=max(hold_until, t_stop + 1e-3),
        )
    )
    return Trajectory(segments=tuple(segments))


def queued_stop_position(p_tr: float, predecessor_stop: Optional[float], standstill: float) -> float:
    """Stop at the light, or one standstill distance behind a queued predecessor"""
    if predecessor_stop is None:
        return p_tr
    return min(p_tr, predecessor_stop - standstill)


def _emergency_plan(ctx: PlanningContext, state: VehicleState, hold_until: float) -> StandbyPlan:
    traj = brake_to_stop(state, ctx.bounds.u_min, hold_until)
    if not rear_end_ok(traj, ctx):
        raise StandbyConstraintError(
            f"even a full brake from v={state.velocity:.2f} violates the rear-end distance"
        )
    stop_state = traj.segments[-1]
    logger.warning(f"⚠️ emergency stop planned at p={stop_state.p_start:.2f}")
    return StandbyPlan(
        stop_time=stop_state.t_start,
        stop_position=stop_state.p_start,
        trajectory=traj,
        emergency=True,
    )


def plan_standby(
    ctx: PlanningContext,
    state: VehicleState,
    p_tr: float,
    predecessor_stop: Optional[float] = None,
) -> StandbyPlan:
    """
    Stop at the light (or behind a queue) as late as possible.

    The stop position is pulled back in 1 m steps until the whole stop arc keeps the
    rear-end distance. Vehicles that are practically at rest, or whose stop would
    need more than u_min, brake at u_min instead.

    Returns:
        StandbyPlan holding after the stop for t_cap seconds
    """
    hold_until = state.time + ctx.t_cap
    stop = queued_stop_position(p_tr, predecessor_stop, ctx.standstill)
    if state.velocity <= HOLD_SPEED:
        return _emergency_plan(ctx, state, hold_until)

    for pullback in range(MAX_PULLBACKS + 1):
        candidate = stop - pullback * PULLBACK_STEP
        distance = candidate - state.position
        if distance <= MIN_STOP_DISTANCE:
            break
        stop_time = state.time + latest_stop_time(state.velocity, distance, ctx.bounds.u_min)
        try:
            traj = standby_trajectory(
                state, candidate, stop_time, ctx.bounds, max(hold_until, stop_time + ctx.t_cap)
            )
        except StandbyConstraintError:
            break
        if rear_end_ok(traj, ctx):
            if pullback:
                logger.debug(f"standby stop pulled back {pullback} m to {candidate:.2f}")
            return StandbyPlan(stop_time=stop_time, stop_position=candidate, trajectory=traj)
    return _emergency_plan(ctx, state, hold_until)


def replanning_trigger(
    monitor: StandbyMonitor,
    state: VehicleState,
    green_windows: Sequence[GreenWindow],
    p_tr: float,
    pf: float,
    bounds: Bounds,
    t_cap: float = 120.0,
) -> ReplanTrigger:
    """
    Re-evaluate the live crossing window from the current state.

    Returns:
        EXIT_STANDBY when a standby vehicle can now cross some green window with an
        unconstrained cubic, REFINE when a plan limited by a green onset is no longer
        clipped by it, NONE otherwise
    """
    monitor.window_start = None
    monitor.window_end = None
    if state.position >= p_tr or not green_windows:
        return ReplanTrigger.NONE
    if not monitor.in_standby and (monitor.clipped_green_start is None or monitor.refine_used):
        return ReplanTrigger.NONE
    try:
        exit_range = feasible_exit_range(
            state.position, max(state.velocity, 0.0), state.time, pf, bounds, t_cap
        )
    except PlannerError:
        return ReplanTrigger.NONE

    for green in green_windows:
        if green[1] < state.time:
            continue
        window = crossing_window(exit_range, p_tr, green)
        if window.is_empty:
            continue
        monitor.window_start, monitor.window_end = window.t_start, window.t_end
        if monitor.in_standby:
            return ReplanTrigger.EXIT_STANDBY
        if abs(window.g1 - monitor.clipped_green_start) < 1e-9 and window.t_c1 >= window.g1:
            return ReplanTrigger.REFINE
        break
    return ReplanTrigger.NONE
