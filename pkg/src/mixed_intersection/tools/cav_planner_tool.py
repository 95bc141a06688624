"""
CAV Planner Tool for Mixed Intersection Simulator
Energy-optimal unconstrained cubic solve, feasible exit-time range and the minimum exit-time search
"""

import logging
import math
from typing import Any, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from mixed_intersection.tools.trajectory_tool import (
    Bounds,
    CubicSegment,
    Trajectory,
    VehicleState,
    check_segment_bounds,
    crossing_time,
    satisfies_rear_end,
)

logger = logging.getLogger(__name__)

MIN_HORIZON = 1e-6
SCAN_STEP = 0.01
REFINE_TOLERANCE = 1e-3
GREEN_TOLERANCE = 1e-9

GreenWindow = Tuple[float, float]


class PlannerError(Exception):
    """Custom exception for CAV planning operations"""
    pass


class DegenerateHorizonError(PlannerError):
    """Raised when the planning horizon is too short for a well-posed cubic"""
    pass


class InfeasibleStateError(PlannerError):
    """Raised when no exit time is reachable from the anchor state"""
    pass


class ExitTimeRange(BaseModel):
    """Earliest and latest exit times reachable by a feasible unconstrained cubic"""
    model_config = ConfigDict(frozen=True)

    lower: float
    upper: float
    anchor_position: float
    anchor_velocity: float
    anchor_time: float
    target_position: float

    @model_validator(mode="after")
    def _check_order(self) -> "ExitTimeRange":
        if self.lower > self.upper:
            raise ValueError(f"lower exit time {self.lower} exceeds upper {self.upper}")
        return self

    def boundary_cubics(self) -> Tuple[CubicSegment, CubicSegment]:
        """Cubics exiting at the lower and at the upper bound"""
        args = (self.anchor_position, self.anchor_velocity, self.anchor_time, self.target_position)
        return solve_unconstrained(*args, self.lower), solve_unconstrained(*args, self.upper)


class PlanningContext(BaseModel):
    """
    Everything a CAV needs to plan against its surroundings.

    green_windows=None means the light no longer constrains the vehicle;
    an empty tuple means every known instant is red.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    bounds: Bounds = Field(default_factory=Bounds)
    green_windows: Optional[Tuple[GreenWindow, ...]] = None
    light_position: Optional[float] = None
    predecessor: Optional[Any] = None
    predecessor_light_time: Optional[float] = None
    predecessor_light_speed: Optional[float] = None
    predecessor_stopping: bool = False
    standstill: float = 3.0
    delta_t: float = Field(default=0.1, gt=0.0)
    check_grid: float = Field(default=0.01, gt=0.0)
    t_cap: float = Field(default=120.0, gt=0.0)
    v_des: float = 15.0

    @model_validator(mode="after")
    def _check_windows(self) -> "PlanningContext":
        if self.green_windows:
            for g1, g2 in self.green_windows:
                if not g1 < g2:
                    raise ValueError(f"green window [{g1}, {g2}] is empty")
            for (_, prev_end), (next_start, _) in zip(self.green_windows, self.green_windows[1:]):
                if next_start < prev_end:
                    raise ValueError("green windows must be disjoint and ordered")
        return self

    def with_updates(self, **changes: Any) -> "PlanningContext":
        return self.model_copy(update=changes)


def in_green(t: float, windows: Optional[Sequence[GreenWindow]]) -> bool:
    """True when t falls inside one of the windows; None means unconstrained"""
    if windows is None:
        return True
    return any(g1 - GREEN_TOLERANCE <= t <= g2 + GREEN_TOLERANCE for g1, g2 in windows)


def solve_unconstrained(p0: float, v0: float, t0: float, pf: float, tf: float) -> CubicSegment:
    """
    Solve the energy-optimal cubic with p(t0)=p0, v(t0)=v0, p(tf)=pf, u(tf)=0.

    Args:
        p0: Anchor position (m)
        v0: Anchor speed (m/s)
        t0: Anchor time (s)
        pf: Terminal position (m)
        tf: Terminal time (s)

    Returns:
        CubicSegment on [t0, tf] with coefficients in shifted time
    """
    T = tf - t0
    if T < MIN_HORIZON:
        raise DegenerateHorizonError(f"horizon {T:.3e}s too short between t0={t0} and tf={tf}")
    system = np.array(
        [
            [0.0, 0.0, 0.0, 1.0],
            [0.0, 0.0, 1.0, 0.0],
            [T ** 3, T ** 2, T, 1.0],
            [6.0 * T, 2.0, 0.0, 0.0],
        ]
    )
    rhs = np.array([p0, v0, pf, 0.0])
    try:
        a, b, c, d = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as e:
        raise DegenerateHorizonError(f"singular cubic system for horizon {T}: {e}") from e
    return CubicSegment(a=a, b=b, c=c, d=d, t_start=t0, t_end=tf)


def _family_feasible(
    horizons: np.ndarray, v0: float, distance: float, bounds: Bounds, margin: float = 1e-6
) -> np.ndarray:
    # Speed is monotone and acceleration linear along the family, so endpoints decide.
    terminal_speed = 1.5 * distance / horizons - 0.5 * v0
    initial_accel = 3.0 * (distance - v0 * horizons) / horizons ** 2
    return (
        (terminal_speed >= bounds.v_min - margin)
        & (terminal_speed <= bounds.v_max + margin)
        & (initial_accel >= bounds.u_min - margin)
        & (initial_accel <= bounds.u_max + margin)
    )


def _cubic_feasible(p0: float, v0: float, t0: float, pf: float, tf: float, bounds: Bounds) -> bool:
    try:
        return check_segment_bounds(solve_unconstrained(p0, v0, t0, pf, tf), bounds)
    except DegenerateHorizonError:
        return False


def feasible_exit_range(
    p0: float,
    v0: float,
    t0: float,
    pf: float,
    bounds: Bounds,
    t_cap: float = 120.0,
) -> ExitTimeRange:
    """
    Earliest and latest exit times of a bound-respecting unconstrained cubic.

    The horizon is scanned on a 10 ms grid and each boundary is refined by bisection
    on the cubic feasibility predicate to 1 ms. The latest exit is capped at t0 + t_cap.
    When |u_min| lies between 2v0²/(3D) and 3v0²/(4D) the feasible horizons form two runs;
    only the first is returned, so every exit time in the range is feasible.

    Args:
        p0: Anchor position (m)
        v0: Anchor speed (m/s)
        t0: Anchor time (s)
        pf: Terminal position (m)
        bounds: Speed and control limits
        t_cap: Cap on the planning horizon (s)

    Returns:
        ExitTimeRange anchored at (p0, v0, t0)
    """
    if pf <= p0:
        raise PlannerError(f"terminal position {pf} not ahead of anchor {p0}")
    if v0 < bounds.v_min - 1e-6 or v0 > bounds.v_max + 1e-6:
        raise InfeasibleStateError(f"anchor speed {v0} outside [{bounds.v_min}, {bounds.v_max}]")

    distance = pf - p0
    horizons = SCAN_STEP * np.arange(1, int(round(t_cap / SCAN_STEP)) + 1)
    feasible = _family_feasible(horizons, v0, distance, bounds)
    if not feasible.any():
        raise InfeasibleStateError(
            f"no feasible exit time from p={p0:.2f}, v={v0:.2f} to {pf} within {t_cap}s"
        )
    indices = np.flatnonzero(feasible)
    first, last = int(indices[0]), int(indices[-1])
    gaps = np.flatnonzero(np.diff(indices) > 1)
    if gaps.size:
        # strong braking limits can split the family; keep the run holding the earliest exit
        last = int(indices[gaps[0]])
        logger.debug(
            f"exit horizons from p={p0:.2f} v={v0:.2f} split at {horizons[last]:.2f}s; later run dropped"
        )

    def predicate(horizon: float) -> bool:
        return _cubic_feasible(p0, v0, t0, pf, t0 + horizon, bounds)

    lower = float(horizons[first])
    if first > 0:
        lo, hi = float(horizons[first - 1]), lower
        while hi - lo > REFINE_TOLERANCE:
            mid = 0.5 * (lo + hi)
            if predicate(mid):
                hi = mid
            else:
                lo = mid
        lower = hi

    upper = float(horizons[last])
    if last == len(horizons) - 1:
        upper = t_cap
    else:
        lo, hi = upper, float(horizons[last + 1])
        while hi - lo > REFINE_TOLERANCE:
            mid = 0.5 * (lo + hi)
            if predicate(mid):
                lo = mid
            else:
                hi = mid
        upper = lo

    logger.debug(f"🔍 exit range from p={p0:.2f} v={v0:.2f}: [{t0 + lower:.3f}, {t0 + upper:.3f}]")
    return ExitTimeRange(
        lower=t0 + lower,
        upper=t0 + upper,
        anchor_position=p0,
        anchor_velocity=v0,
        anchor_time=t0,
        target_position=pf,
    )


def build_unconstrained_trajectory(
    segment: CubicSegment, light_position: Optional[float]
) -> Trajectory:
    """Wrap a cubic as a trajectory, annotating the light crossing when it lies ahead"""
    p_start = segment.state_at(segment.t_start)[0]
    p_end = segment.state_at(segment.t_end)[0]
    light_time = None
    if light_position is not None and p_start < light_position <= p_end:
        single = Trajectory(segments=(segment,))
        light_time = crossing_time(single, light_position)
    return Trajectory(
        segments=(segment,),
        light_position=light_position if light_time is not None else None,
        light_crossing_time=light_time,
        exit_position=p_end,
        exit_time=segment.t_end,
    )


def rear_end_ok(traj: Any, ctx: PlanningContext, t_from: Optional[float] = None) -> bool:
    """Rear-end distance check of a candidate plan against the context's predecessor"""
    return satisfies_rear_end(
        traj,
        ctx.predecessor,
        standstill=ctx.standstill,
        reaction_time=ctx.bounds.reaction_time,
        grid_step=ctx.check_grid,
        t_from=t_from,
    )


def min_exit_time_search(
    ctx: PlanningContext, anchor: VehicleState, pf: float
) -> Optional[Trajectory]:
    """
    Minimum exit-time unconstrained trajectory from the anchor state.

    Exit times are tried from the earliest feasible one upward in steps of delta_t.
    A candidate is accepted when it respects the bounds, crosses the light inside a
    green window (when the light still lies ahead) and keeps the rear-end distance
    to the predecessor.

    Returns:
        The first feasible Trajectory, or None when every candidate fails
    """
    try:
        exit_range = feasible_exit_range(
            anchor.position, anchor.velocity, anchor.time, pf, ctx.bounds, ctx.t_cap
        )
    except PlannerError as e:
        logger.debug(f"⚠️ exit-time search has no exit range: {e}")
        return None

    light_ahead = (
        ctx.light_position is not None
        and ctx.green_windows is not None
        and anchor.position < ctx.light_position
    )
    n_steps = int(math.floor((exit_range.upper - exit_range.lower) / ctx.delta_t + 1e-9))
    for k in range(n_steps + 1):
        tf = exit_range.lower + k * ctx.delta_t
        segment = solve_unconstrained(anchor.position, anchor.velocity, anchor.time, pf, tf)
        if not check_segment_bounds(segment, ctx.bounds):
            continue
        traj = build_unconstrained_trajectory(
            segment, ctx.light_position if light_ahead else None
        )
        if light_ahead and not in_green(traj.light_crossing_time, ctx.green_windows):
            continue
        if not rear_end_ok(traj, ctx):
            continue
        logger.debug(f"✅ exit-time search found exit time {tf:.3f} after {k + 1} candidates")
        return traj
    return None
