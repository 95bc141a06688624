"""
Signal Feasibility Tool for Mixed Intersection Simulator
Green-window feasibility of unconstrained plans and the constrained crossing-time search
"""

import logging
import math
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, model_validator

from mixed_intersection.tools.cav_planner_tool import (
    ExitTimeRange,
    GreenWindow,
    PlannerError,
    PlanningContext,
    min_exit_time_search,
    build_unconstrained_trajectory,
    feasible_exit_range,
    rear_end_ok,
    solve_unconstrained,
)
from mixed_intersection.tools.trajectory_tool import (
    Bounds,
    ConstAccelSegment,
    Trajectory,
    VehicleState,
    crossing_time,
)

logger = logging.getLogger(__name__)

MIN_CROSSING_SPEED = 0.1
SEARCH_TOLERANCE = 1e-9


class SignalFeasibilityError(Exception):
    """Custom exception for crossing-window and constrained-plan operations"""
    pass


class PhysicallyInfeasibleError(SignalFeasibilityError):
    """Raised when the requested arrival time is outside what the vehicle can do"""
    pass


class CrossingWindow(BaseModel):
    """Reachable light-arrival interval [t_c1, t_c2] intersected with one green window"""
    model_config = ConfigDict(frozen=True)

    t_c1: float
    t_c2: float
    g1: float
    g2: float

    @model_validator(mode="after")
    def _check(self) -> "CrossingWindow":
        if self.t_c1 > self.t_c2:
            raise ValueError(f"t_c1 ({self.t_c1}) exceeds t_c2 ({self.t_c2})")
        if not self.g1 < self.g2:
            raise ValueError(f"green window [{self.g1}, {self.g2}] is empty")
        return self

    @classmethod
    def from_bounds(cls, t_c1: float, t_c2: float, green: GreenWindow) -> "CrossingWindow":
        return cls(t_c1=t_c1, t_c2=t_c2, g1=green[0], g2=green[1])

    @property
    def t_start(self) -> float:
        return max(self.t_c1, self.g1)

    @property
    def t_end(self) -> float:
        return min(self.t_c2, self.g2)

    @property
    def is_empty(self) -> bool:
        return self.t_start > self.t_end

    @property
    def clipped_by_green_start(self) -> bool:
        """The fastest reachable arrival is earlier than the green onset"""
        return self.t_c1 < self.g1


class ConstrainedSearchInterval(BaseModel):
    """Candidate light-crossing times for a constrained plan"""
    model_config = ConfigDict(frozen=True)

    lo: float
    hi: float
    epsilon: Optional[float] = None

    @property
    def is_empty(self) -> bool:
        return self.lo > self.hi + SEARCH_TOLERANCE


def crossing_window(exit_range: ExitTimeRange, p_tr: float, green: GreenWindow) -> CrossingWindow:
    """
    Intersect the light-arrival times of the two boundary cubics with a green window.

    Args:
        exit_range: Feasible exit-time range anchored before the light
        p_tr: Light position (m)
        green: Green window (g1, g2)

    Returns:
        CrossingWindow; an empty intersection is a valid result
    """
    fast, slow = exit_range.boundary_cubics()
    t_fast = crossing_time(Trajectory(segments=(fast,)), p_tr)
    t_slow = crossing_time(Trajectory(segments=(slow,)), p_tr)
    return CrossingWindow.from_bounds(min(t_fast, t_slow), max(t_fast, t_slow), green)


def minimal_arrival_time(v0: float, distance: float, bounds: Bounds) -> float:
    """
    Shortest time to cover the distance under u <= u_max and v <= v_max.

    Args:
        v0: Current speed (m/s)
        distance: Distance to the light (m)
        bounds: Speed and control limits

    Returns:
        Minimal arrival time relative to now (s)
    """
    u, v_max = bounds.u_max, bounds.v_max
    p_vmax = (v_max ** 2 - v0 ** 2) / (2.0 * u)
    if p_vmax >= distance:
        return (math.sqrt(v0 ** 2 + 2.0 * u * distance) - v0) / u
    return (v_max - v0) / u + (distance - p_vmax) / v_max


def build_constrained_trajectory(
    state: VehicleState, t_tr: float, p_tr: float, bounds: Bounds
) -> Trajectory:
    """
    Accelerate at u_max to a cruise speed, then cruise, arriving at p_tr exactly at t_tr.

    Args:
        state: Current vehicle state
        t_tr: Required light-crossing time (s)
        p_tr: Light position (m)
        bounds: Speed and control limits

    Returns:
        Pre-light Trajectory ending at the light
    """
    distance = p_tr - state.position
    horizon = t_tr - state.time
    v0, u = state.velocity, bounds.u_max
    if distance <= 0.0 or horizon <= 0.0:
        raise PhysicallyInfeasibleError(
            f"light at {p_tr} is not ahead of p={state.position} within t_tr={t_tr}"
        )
    t_min = minimal_arrival_time(v0, distance, bounds)
    if horizon < t_min - SEARCH_TOLERANCE:
        raise PhysicallyInfeasibleError(
            f"arrival in {horizon:.4f}s is faster than the minimum {t_min:.4f}s"
        )
    if v0 > 0.0 and horizon > distance / v0 + SEARCH_TOLERANCE:
        raise PhysicallyInfeasibleError(
            f"arrival in {horizon:.4f}s is slower than cruising at the current speed"
        )

    s = v0 + u * horizon
    discriminant = max(s * s - v0 * v0 - 2.0 * u * distance, 0.0)
    v_c = min(max(s - math.sqrt(discriminant), v0), bounds.v_max)
    t_accel = min((v_c - v0) / u, horizon)

    segments = []
    t_switch = state.time + t_accel
    if t_accel > SEARCH_TOLERANCE:
        segments.append(
            ConstAccelSegment(
                acceleration=u,
                p_start=state.position,
                v_start=v0,
                t_start=state.time,
                t_end=t_switch,
            )
        )
        p_switch = state.position + 0.5 * (v0 + v_c) * t_accel
    else:
        t_switch = state.time
        p_switch = state.position
    if t_tr - t_switch > SEARCH_TOLERANCE:
        segments.append(
            ConstAccelSegment(
                acceleration=0.0, p_start=p_switch, v_start=v_c, t_start=t_switch, t_end=t_tr
            )
        )
    return Trajectory(
        segments=tuple(segments), light_position=p_tr, light_crossing_time=t_tr
    )


def crossing_search_interval(
    ctx: PlanningContext, state: VehicleState, green: GreenWindow
) -> Optional[ConstrainedSearchInterval]:
    """
    Candidate crossing times [max(T_min, g1), min(g2, cruise limit)], tightened behind
    the predecessor's light crossing plus the headway epsilon.

    Returns:
        The interval, or None when the predecessor will not clear the light
    """
    p_tr = ctx.light_position
    distance = p_tr - state.position
    bounds = ctx.bounds
    t_min = state.time + minimal_arrival_time(state.velocity, distance, bounds)
    cruise_limit = (
        state.time + distance / state.velocity
        if state.velocity > 0.0
        else state.time + ctx.t_cap
    )
    lo = max(t_min, green[0])
    hi = min(green[1], cruise_limit)

    epsilon = None
    if ctx.predecessor is not None:
        if ctx.predecessor_light_time is None:
            if ctx.predecessor_stopping:
                return None
        else:
            v_hat = ctx.predecessor_light_speed
            if v_hat is None or v_hat < MIN_CROSSING_SPEED:
                v_hat = ctx.v_des
            epsilon = bounds.reaction_time + ctx.standstill / v_hat
            lo = max(lo, ctx.predecessor_light_time + epsilon)
    return ConstrainedSearchInterval(lo=lo, hi=hi, epsilon=epsilon)


def _search(
    ctx: PlanningContext, state: VehicleState, green: GreenWindow, pf: float
) -> Optional[Tuple[float, Trajectory, Trajectory]]:
    interval = crossing_search_interval(ctx, state, green)
    if interval is None or interval.is_empty:
        return None
    p_tr = ctx.light_position
    n_steps = int(math.floor((interval.hi - interval.lo) / ctx.delta_t + SEARCH_TOLERANCE))
    for k in range(n_steps + 1):
        t_tr = interval.lo + k * ctx.delta_t
        try:
            pre_light = build_constrained_trajectory(state, t_tr, p_tr, ctx.bounds)
        except PhysicallyInfeasibleError:
            continue
        if not rear_end_ok(pre_light, ctx):
            continue
        v_tr = pre_light.end_state.velocity
        try:
            post_range = feasible_exit_range(p_tr, v_tr, t_tr, pf, ctx.bounds, ctx.t_cap)
        except PlannerError:
            continue
        slowest = build_unconstrained_trajectory(
            solve_unconstrained(p_tr, v_tr, t_tr, pf, post_range.upper), None
        )
        if not rear_end_ok(slowest, ctx):
            continue
        return t_tr, pre_light, slowest
    return None


def find_crossing_time(
    ctx: PlanningContext, state: VehicleState, green: GreenWindow, pf: float
) -> Optional[float]:
    """
    Earliest light-crossing time on the delta_t grid of the search interval whose
    constrained pre-light arc and slowest post-light cubic keep the rear-end distance.

    Returns:
        The crossing time, or None when the interval is exhausted
    """
    found = _search(ctx, state, green, pf)
    return None if found is None else found[0]


def plan_constrained(
    ctx: PlanningContext, state: VehicleState, green: GreenWindow, pf: float
) -> Optional[Trajectory]:
    """
    Full constrained plan: the pre-light arc followed by the minimum exit-time cubic
    from the light, or the slowest verified cubic when that search fails.
    """
    found = _search(ctx, state, green, pf)
    if found is None:
        return None
    t_tr, pre_light, slowest = found
    anchor = pre_light.end_state
    post_ctx = ctx.with_updates(green_windows=None)
    post_light = min_exit_time_search(post_ctx, anchor, pf) or slowest
    logger.debug(
        f"🚦 constrained plan crosses at {t_tr:.2f}s with v={anchor.velocity:.2f}, "
        f"exits at {post_light.exit_time:.2f}s"
    )
    return pre_light.concat(post_light)
