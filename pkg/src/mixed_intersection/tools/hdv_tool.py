"""
HDV Tool for Mixed Intersection Simulator
Intelligent Driver Model with a virtual red-light vehicle, forward prediction and deviation checks
"""

import logging
import math
from enum import Enum
from typing import Any, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from mixed_intersection.tools.trajectory_tool import VehicleState

logger = logging.getLogger(__name__)

STOP_SPEED = 0.1

GreenWindow = Tuple[float, float]


class HdvModelError(Exception):
    """Custom exception for human-driven vehicle modelling"""
    pass


class CollisionStateError(HdvModelError):
    """Raised when an IDM interaction is evaluated at a nonpositive gap"""
    pass


class RedLightDv(str, Enum):
    """Relative speed assumed against the virtual red-light vehicle"""
    STATIONARY = "stationary"
    ZERO = "zero"


class DeviationResult(str, Enum):
    OK = "ok"
    REPLAN_FOLLOWERS = "replan_followers"


class IdmParams(BaseModel):
    """Car-following parameters of one human driver"""
    model_config = ConfigDict(frozen=True)

    v_des: float = Field(default=15.0, gt=0.0)
    u_max: float = Field(default=5.0, gt=0.0)
    u_min: float = Field(default=-5.0, lt=0.0)
    delta: float = Field(default=4.0, ge=1.0)
    standstill: float = Field(default=5.0, gt=0.0)
    time_headway: float = Field(default=1.5, gt=0.0)
    comfortable_decel: float = Field(default=2.0, gt=0.0)
    red_light_dv: RedLightDv = RedLightDv.STATIONARY

    def desired_gap(self, velocity: float, delta_v: float) -> float:
        dynamic = velocity * self.time_headway + velocity * delta_v / (
            2.0 * math.sqrt(self.u_max * self.comfortable_decel)
        )
        return self.standstill + max(0.0, dynamic)


def idm_acceleration(
    velocity: float,
    params: IdmParams,
    leader_gap: Optional[float] = None,
    leader_speed: Optional[float] = None,
    light_gap: Optional[float] = None,
) -> float:
    """
    IDM acceleration against an optional leader and an optional red light.

    Args:
        velocity: Own speed (m/s)
        params: IDM parameters
        leader_gap: Distance to the leader (m), None for no leader
        leader_speed: Leader speed (m/s)
        light_gap: Distance to the light when it acts as a stationary vehicle (m)

    Returns:
        The lower of the single-interaction accelerations, clamped to [u_min, u_max]
    """
    free = 1.0 - (max(velocity, 0.0) / params.v_des) ** params.delta
    candidates = []
    if leader_gap is not None:
        if leader_gap <= 0.0:
            raise CollisionStateError(f"nonpositive gap {leader_gap:.4f} m to the leader")
        s_star = params.desired_gap(velocity, velocity - (leader_speed or 0.0))
        candidates.append(params.u_max * (free - (s_star / leader_gap) ** 2))
    if light_gap is not None:
        if light_gap <= 0.0:
            raise CollisionStateError(f"nonpositive gap {light_gap:.4f} m to the red light")
        dv = velocity if params.red_light_dv == RedLightDv.STATIONARY else 0.0
        s_star = params.desired_gap(velocity, dv)
        candidates.append(params.u_max * (free - (s_star / light_gap) ** 2))
    u = min(candidates) if candidates else params.u_max * free
    return min(max(u, params.u_min), params.u_max)


def idm_step(
    position: float,
    velocity: float,
    dt: float,
    params: IdmParams,
    leader_position: Optional[float] = None,
    leader_speed: Optional[float] = None,
    light_position: Optional[float] = None,
) -> Tuple[float, float, float]:
    """
    One explicit RK4 step with the leader and the light held at their step-start values.

    Returns:
        (position, velocity) after dt and the step-start acceleration
    """

    def accel(p: float, v: float) -> float:
        return idm_acceleration(
            v,
            params,
            leader_gap=None if leader_position is None else leader_position - p,
            leader_speed=leader_speed,
            light_gap=None if light_position is None else light_position - p,
        )

    k1v = accel(position, velocity)
    k1p = velocity
    k2v = accel(position + 0.5 * dt * k1p, velocity + 0.5 * dt * k1v)
    k2p = velocity + 0.5 * dt * k1v
    k3v = accel(position + 0.5 * dt * k2p, velocity + 0.5 * dt * k2v)
    k3p = velocity + 0.5 * dt * k2v
    k4v = accel(position + dt * k3p, velocity + dt * k3v)
    k4p = velocity + dt * k3v
    new_p = position + dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    new_v = velocity + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return max(new_p, position), max(new_v, 0.0), k1v


class LightPerception(BaseModel):
    """
    How a human driver reads the light ahead.

    A light that is red, or will turn red within the amber time, is a stationary
    vehicle at the stop line unless the driver is already inside the physical
    stopping distance while it is still green; that green is then run through.
    """

    proceed_through: Optional[float] = None

    def blocks(
        self,
        t: float,
        position: float,
        velocity: float,
        windows: Sequence[GreenWindow],
        p_tr: float,
        amber_time: float,
        u_min: float,
    ) -> bool:
        if position >= p_tr:
            return False
        current = next((w for w in windows if w[0] <= t < w[1]), None)
        if current is None:
            return not (self.proceed_through is not None and self.proceed_through <= t)
        if t < current[1] - amber_time:
            return False
        if self.proceed_through == current[1]:
            return False
        if p_tr - position <= velocity ** 2 / (-2.0 * u_min):
            self.proceed_through = current[1]
            return False
        return True


class HdvPrediction(BaseModel):
    """Forward-integrated HDV motion on a fixed grid"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    accelerations: np.ndarray
    predicted_stop: bool = False
    light_crossing_time: Optional[float] = None
    light_crossing_speed: Optional[float] = None
    exits: bool = False
    truncated: bool = False
    threshold: float = 2.0

    @model_validator(mode="after")
    def _check_series(self) -> "HdvPrediction":
        n = len(self.times)
        if n == 0 or any(len(arr) != n for arr in (self.positions, self.velocities, self.accelerations)):
            raise ValueError("prediction series must be non-empty and of equal length")
        return self

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def states(self, times: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        times = np.asarray(times, dtype=float)
        return (
            np.interp(times, self.times, self.positions),
            np.interp(times, self.times, self.velocities),
        )

    def state_at(self, t: float) -> VehicleState:
        p, v = self.states(np.array([t]))
        u = float(np.interp(t, self.times, self.accelerations))
        return VehicleState(position=float(p[0]), velocity=float(v[0]), acceleration=u, time=t)


class HdvContext(BaseModel):
    """Frozen snapshot of what an HDV reacts to"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    leader: Optional[Any] = None
    green_windows: Tuple[GreenWindow, ...] = ()
    light_position: float = 250.0
    exit_position: float = 300.0
    amber_time: float = 3.0


def light_target(
    perception: LightPerception,
    t: float,
    position: float,
    velocity: float,
    ctx: HdvContext,
    params: IdmParams,
) -> Optional[float]:
    """Light position when the light acts as a stationary vehicle, else None"""
    blocked = perception.blocks(
        t,
        position,
        velocity,
        ctx.green_windows,
        ctx.light_position,
        ctx.amber_time,
        params.u_min,
    )
    return ctx.light_position if blocked else None


def predict(
    state: VehicleState,
    params: IdmParams,
    ctx: HdvContext,
    horizon: float = 60.0,
    step: float = 0.01,
    perception: Optional[LightPerception] = None,
    threshold: float = 2.0,
) -> HdvPrediction:
    """
    Forward-integrate the IDM against a context snapshot.

    Args:
        state: Current HDV state
        params: IDM parameters
        ctx: Leader motion and the known green windows
        horizon: Prediction horizon (s)
        step: RK4 step (s)
        perception: Driver's light perception, copied before use
        threshold: Deviation threshold carried by the prediction (m)

    Returns:
        HdvPrediction ending at the horizon or at the zone exit; truncated is set when
        the roll-out reached a collision state and stopped early
    """
    perception = (perception or LightPerception()).model_copy()
    n_steps = int(round(horizon / step))
    grid = state.time + step * np.arange(n_steps + 1)

    leader = ctx.leader
    if leader is not None:
        lo, hi = leader.t_start - 1e-9, leader.t_end + 1e-9
        covered = (grid >= lo) & (grid <= hi)
        leader_p = np.full_like(grid, np.nan)
        leader_v = np.full_like(grid, np.nan)
        if covered.any():
            leader_p[covered], leader_v[covered] = leader.states(grid[covered])
            # a leader at or past the exit has left the zone
            covered &= np.nan_to_num(leader_p, nan=np.inf) < ctx.exit_position
    else:
        covered = np.zeros_like(grid, dtype=bool)

    positions = [state.position]
    velocities = [state.velocity]
    accelerations = []
    predicted_stop = False
    cross_time = cross_speed = None
    exits = truncated = False
    p, v = state.position, state.velocity
    for j in range(n_steps):
        t = float(grid[j])
        light = light_target(perception, t, p, v, ctx, params)
        lead_p = float(leader_p[j]) if covered[j] else None
        lead_v = float(leader_v[j]) if covered[j] else None
        try:
            new_p, new_v, u = idm_step(p, v, step, params, lead_p, lead_v, light)
        except CollisionStateError as e:
            logger.warning(f"⚠️ prediction truncated at t={t:.2f}: {e}")
            truncated = True
            break
        accelerations.append(u)
        if light is not None and new_v < STOP_SPEED:
            predicted_stop = True
        if cross_time is None and p < ctx.light_position <= new_p:
            frac = (ctx.light_position - p) / max(new_p - p, 1e-12)
            cross_time = t + frac * step
            cross_speed = v + frac * (new_v - v)
        p, v = new_p, new_v
        positions.append(p)
        velocities.append(v)
        if p >= ctx.exit_position:
            exits = True
            break
    accelerations.append(accelerations[-1] if accelerations else 0.0)
    n = len(positions)
    return HdvPrediction(
        times=grid[:n].copy(),
        positions=np.array(positions),
        velocities=np.array(velocities),
        accelerations=np.array(accelerations),
        predicted_stop=predicted_stop,
        light_crossing_time=cross_time,
        light_crossing_speed=cross_speed,
        exits=exits,
        truncated=truncated,
        threshold=threshold,
    )


def deviation_check(prediction: HdvPrediction, actual: VehicleState) -> DeviationResult:
    """
    Compare the observed HDV position with its prediction.

    Returns:
        REPLAN_FOLLOWERS when the position error exceeds the prediction's threshold
    """
    if not math.isfinite(prediction.threshold):
        return DeviationResult.OK
    if actual.time < prediction.t_start or actual.time > prediction.t_end:
        return DeviationResult.OK
    predicted = float(np.interp(actual.time, prediction.times, prediction.positions))
    if abs(actual.position - predicted) > prediction.threshold:
        logger.debug(
            f"HDV deviated {abs(actual.position - predicted):.2f} m from its prediction"
        )
        return DeviationResult.REPLAN_FOLLOWERS
    return DeviationResult.OK
