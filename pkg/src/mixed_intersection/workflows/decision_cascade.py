"""
Decision cascade for one CAV: unconstrained, constrained, standby, then car-following
"""

import logging
from typing import Any, Dict, Optional

from pydantic import BaseModel, ConfigDict

from mixed_intersection.tools.cav_planner_tool import (
    PlannerError,
    PlanningContext,
    min_exit_time_search,
    feasible_exit_range,
)
from mixed_intersection.tools.signal_feasibility_tool import crossing_window, plan_constrained
from mixed_intersection.tools.standby_tool import StandbyError, StandbyPlan, plan_standby
from mixed_intersection.tools.trace_tool import VehicleMode
from mixed_intersection.tools.trajectory_tool import Trajectory, VehicleState

logger = logging.getLogger(__name__)


class CascadeOutcome(BaseModel):
    """Result of running the cascade once; trajectory is None only in idm mode"""
    model_config = ConfigDict(frozen=True)

    mode: VehicleMode
    trajectory: Optional[Trajectory] = None
    standby: Optional[StandbyPlan] = None
    clipped_green_start: Optional[float] = None

    def summary(self) -> Dict[str, Any]:
        traj = self.trajectory
        return {
            "mode": self.mode.value,
            "light_crossing_time": None if traj is None else traj.light_crossing_time,
            "exit_time": None if traj is None else traj.exit_time,
            "energy": None if traj is None else traj.energy(),
            "stop_time": None if self.standby is None else self.standby.stop_time,
            "stop_position": None if self.standby is None else self.standby.stop_position,
            "emergency_stop": bool(self.standby and self.standby.emergency),
            "clipped_green_start": self.clipped_green_start,
        }


def plan_cav(
    ctx: PlanningContext,
    state: VehicleState,
    pf: float,
    predecessor_stop: Optional[float] = None,
) -> CascadeOutcome:
    """
    Run the cascade from the current state.

    Past the light only the minimum exit-time search is tried. Before it, the known green windows are
    visited in chronological order: a non-empty crossing window gets the exit-time search,
    an empty one a constrained plan. Standby follows when every window fails, and
    car-following when even the standby stop is unsafe.

    Args:
        ctx: Planning context built from the coordinator store
        state: Current CAV state
        pf: Zone exit position (m)
        predecessor_stop: Where a queued predecessor will rest, if it is stopping

    Returns:
        CascadeOutcome
    """
    p_tr = ctx.light_position
    if p_tr is None or state.position >= p_tr or ctx.green_windows is None:
        traj = min_exit_time_search(ctx.with_updates(green_windows=None), state, pf)
        if traj is not None:
            return CascadeOutcome(mode=VehicleMode.UNCONSTRAINED, trajectory=traj)
        logger.debug(f"post-light plan failed at t={state.time:.2f}, falling back to idm")
        return CascadeOutcome(mode=VehicleMode.IDM)

    try:
        exit_range = feasible_exit_range(
            state.position, state.velocity, state.time, pf, ctx.bounds, ctx.t_cap
        )
    except PlannerError as e:
        logger.debug(f"no unconstrained exit range at t={state.time:.2f}: {e}")
        exit_range = None

    for green in ctx.green_windows:
        if green[1] < state.time:
            continue
        if exit_range is not None:
            window = crossing_window(exit_range, p_tr, green)
            if not window.is_empty:
                traj = min_exit_time_search(ctx.with_updates(green_windows=(green,)), state, pf)
                if traj is not None:
                    clipped = green[0] if window.clipped_by_green_start else None
                    return CascadeOutcome(
                        mode=VehicleMode.UNCONSTRAINED, trajectory=traj, clipped_green_start=clipped
                    )
                continue
        traj = plan_constrained(ctx, state, green, pf)
        if traj is not None:
            return CascadeOutcome(mode=VehicleMode.CONSTRAINED, trajectory=traj)

    try:
        standby = plan_standby(ctx, state, p_tr, predecessor_stop)
    except StandbyError as e:
        logger.warning(f"⚠️ standby unsafe at t={state.time:.2f} ({e}); following with idm")
        return CascadeOutcome(mode=VehicleMode.IDM)
    return CascadeOutcome(mode=VehicleMode.STANDBY, trajectory=standby.trajectory, standby=standby)


def refine_plan(
    ctx: PlanningContext, state: VehicleState, pf: float, current: Trajectory, green_start: float
) -> Optional[Trajectory]:
    """
    Re-run the minimum exit-time search once the green onset no longer clips the crossing window.

    Returns:
        The new plan when it exits strictly earlier than the current one, else None
    """
    windows = tuple(w for w in (ctx.green_windows or ()) if abs(w[0] - green_start) < 1e-9)
    if not windows:
        return None
    traj = min_exit_time_search(ctx.with_updates(green_windows=windows), state, pf)
    if traj is None or current.exit_time is None or traj.exit_time >= current.exit_time:
        return None
    logger.debug(f"refined exit time {current.exit_time:.2f} -> {traj.exit_time:.2f}")
    return traj
