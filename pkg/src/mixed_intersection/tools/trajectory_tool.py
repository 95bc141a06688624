"""
Trajectory Tool for Mixed Intersection Simulator
Domain types shared by every planner, piecewise trajectory evaluation and crossing-time search
"""

import bisect as _bisect
import logging
from enum import Enum
from typing import Annotated, Literal, Optional, Protocol, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.optimize import bisect

logger = logging.getLogger(__name__)

CONTINUITY_TOLERANCE = 1e-6
ROOT_TOLERANCE = 1e-9
TIME_TOLERANCE = 1e-9


class TrajectoryError(Exception):
    """Custom exception for trajectory operations"""
    pass


class QueryOutOfRangeError(TrajectoryError):
    """Raised when a trajectory is evaluated outside its validity interval"""
    pass


class NoCrossingError(TrajectoryError):
    """Raised when a trajectory never reaches the requested position"""
    pass


class VehicleClass(str, Enum):
    """Connected automated vehicle or human-driven vehicle"""
    CAV = "cav"
    HDV = "hdv"


class VehicleState(BaseModel):
    """Position (m along own path), velocity, acceleration of one vehicle at time t"""
    model_config = ConfigDict(frozen=True)

    position: float
    velocity: float
    acceleration: float = 0.0
    time: float


class VehicleInfo(BaseModel):
    """Static identity of a vehicle inside the control zone"""
    model_config = ConfigDict(frozen=True)

    vehicle_id: int
    vehicle_class: VehicleClass
    path: str
    entry_time: float = Field(ge=0.0)
    entry_speed: float = Field(ge=0.0)
    standstill: float = Field(gt=0.0)


class Bounds(BaseModel):
    """Speed and control limits plus the reaction time used by the rear-end constraint"""
    model_config = ConfigDict(frozen=True)

    v_min: float = 0.0
    v_max: float = 20.0
    u_min: float = -5.0
    u_max: float = 5.0
    reaction_time: float = 1.0

    @model_validator(mode="after")
    def _check_limits(self) -> "Bounds":
        if not self.v_min < self.v_max:
            raise ValueError(f"v_min ({self.v_min}) must be below v_max ({self.v_max})")
        if not self.u_min < 0.0 < self.u_max:
            raise ValueError(
                f"u_min ({self.u_min}) must be negative and u_max ({self.u_max}) positive"
            )
        if self.reaction_time <= 0.0:
            raise ValueError(f"reaction_time ({self.reaction_time}) must be positive")
        return self


class CubicSegment(BaseModel):
    """
    Energy-optimal arc p(τ) = aτ³ + bτ² + cτ + d with τ = t - t_start.

    Coefficients live in the shifted frame; every public method takes absolute time.
    """
    model_config = ConfigDict(frozen=True)

    kind: Literal["cubic"] = "cubic"
    a: float
    b: float
    c: float
    d: float
    t_start: float
    t_end: float

    @model_validator(mode="after")
    def _check_interval(self) -> "CubicSegment":
        if not self.t_start < self.t_end:
            raise ValueError(f"empty interval [{self.t_start}, {self.t_end}]")
        return self

    @classmethod
    def from_absolute(
        cls, a: float, b: float, c: float, d: float, t_start: float, t_end: float
    ) -> "CubicSegment":
        """Build a segment from coefficients expressed in absolute time"""
        s = t_start
        return cls(
            a=a,
            b=3.0 * a * s + b,
            c=3.0 * a * s * s + 2.0 * b * s + c,
            d=((a * s + b) * s + c) * s + d,
            t_start=t_start,
            t_end=t_end,
        )

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    def state_at(self, t: float) -> Tuple[float, float, float]:
        tau = t - self.t_start
        a, b, c, d = self.a, self.b, self.c, self.d
        return (
            ((a * tau + b) * tau + c) * tau + d,
            (3.0 * a * tau + 2.0 * b) * tau + c,
            6.0 * a * tau + 2.0 * b,
        )

    def sample(self, times: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        tau = np.asarray(times, dtype=float) - self.t_start
        a, b, c, d = self.a, self.b, self.c, self.d
        return (
            ((a * tau + b) * tau + c) * tau + d,
            (3.0 * a * tau + 2.0 * b) * tau + c,
            6.0 * a * tau + 2.0 * b,
        )

    def speed_range(self) -> Tuple[float, float]:
        """Exact min/max speed on the interval (endpoints plus the parabola vertex)"""
        candidates = [self.state_at(self.t_start)[1], self.state_at(self.t_end)[1]]
        if self.a != 0.0:
            vertex = -self.b / (3.0 * self.a)
            if 0.0 < vertex < self.duration:
                candidates.append(self.state_at(self.t_start + vertex)[1])
        return min(candidates), max(candidates)

    def acceleration_range(self) -> Tuple[float, float]:
        u0 = self.state_at(self.t_start)[2]
        u1 = self.state_at(self.t_end)[2]
        return min(u0, u1), max(u0, u1)

    def energy(self) -> float:
        """½∫u² over the segment, closed form"""
        T = self.duration
        a, b = self.a, self.b
        return 6.0 * a * a * T ** 3 + 6.0 * a * b * T ** 2 + 2.0 * b * b * T


class ConstAccelSegment(BaseModel):
    """Constant-acceleration arc starting from (p_start, v_start) at t_start"""
    model_config = ConfigDict(frozen=True)

    kind: Literal["const_accel"] = "const_accel"
    acceleration: float
    p_start: float
    v_start: float
    t_start: float
    t_end: float

    @model_validator(mode="after")
    def _check_interval(self) -> "ConstAccelSegment":
        if not self.t_start < self.t_end:
            raise ValueError(f"empty interval [{self.t_start}, {self.t_end}]")
        return self

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    def state_at(self, t: float) -> Tuple[float, float, float]:
        tau = t - self.t_start
        u = self.acceleration
        return self.p_start + (self.v_start + 0.5 * u * tau) * tau, self.v_start + u * tau, u

    def sample(self, times: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        tau = np.asarray(times, dtype=float) - self.t_start
        u = self.acceleration
        return (
            self.p_start + (self.v_start + 0.5 * u * tau) * tau,
            self.v_start + u * tau,
            np.full_like(tau, u),
        )

    def speed_range(self) -> Tuple[float, float]:
        v1 = self.state_at(self.t_end)[1]
        return min(self.v_start, v1), max(self.v_start, v1)

    def acceleration_range(self) -> Tuple[float, float]:
        return self.acceleration, self.acceleration

    def energy(self) -> float:
        return 0.5 * self.acceleration ** 2 * self.duration


Segment = Annotated[Union[CubicSegment, ConstAccelSegment], Field(discriminator="kind")]


class PlannedMotion(Protocol):
    """Anything a follower can check the rear-end constraint against"""

    @property
    def t_start(self) -> float: ...

    @property
    def t_end(self) -> float: ...

    def states(self, times: np.ndarray) -> Tuple[np.ndarray, np.ndarray]: ...


class Trajectory(BaseModel):
    """
    Piecewise plan with landmark times.

    Segments are contiguous in time with continuous position and velocity.
    At a junction the later segment owns the instant.
    """
    model_config = ConfigDict(frozen=True)

    segments: Tuple[Segment, ...]
    light_position: Optional[float] = None
    light_crossing_time: Optional[float] = None
    exit_position: Optional[float] = None
    exit_time: Optional[float] = None

    @model_validator(mode="after")
    def _check_continuity(self) -> "Trajectory":
        if not self.segments:
            raise ValueError("trajectory needs at least one segment")
        for left, right in zip(self.segments, self.segments[1:]):
            if abs(left.t_end - right.t_start) > TIME_TOLERANCE:
                raise ValueError(f"gap between segments at t={left.t_end}")
            p_l, v_l, _ = left.state_at(left.t_end)
            p_r, v_r, _ = right.state_at(right.t_start)
            if abs(p_l - p_r) > CONTINUITY_TOLERANCE or abs(v_l - v_r) > CONTINUITY_TOLERANCE:
                raise ValueError(f"discontinuous junction at t={right.t_start}")
        for t_mark, p_mark in (
            (self.light_crossing_time, self.light_position),
            (self.exit_time, self.exit_position),
        ):
            if t_mark is not None and p_mark is not None:
                p_at = self.state_at(t_mark).position
                if abs(p_at - p_mark) > CONTINUITY_TOLERANCE:
                    raise ValueError(f"landmark mismatch: p({t_mark})={p_at}, expected {p_mark}")
        return self

    @property
    def t_start(self) -> float:
        return self.segments[0].t_start

    @property
    def t_end(self) -> float:
        return self.segments[-1].t_end

    @property
    def start_position(self) -> float:
        return self.segments[0].state_at(self.t_start)[0]

    @property
    def end_state(self) -> VehicleState:
        return self.state_at(self.t_end)

    def _segment_index(self, t: float) -> int:
        starts = [seg.t_start for seg in self.segments]
        return max(0, _bisect.bisect_right(starts, t) - 1)

    def state_at(self, t: float) -> VehicleState:
        if t < self.t_start - TIME_TOLERANCE or t > self.t_end + TIME_TOLERANCE:
            raise QueryOutOfRangeError(
                f"t={t} outside trajectory interval [{self.t_start}, {self.t_end}]"
            )
        seg = self.segments[self._segment_index(t)]
        p, v, u = seg.state_at(t)
        return VehicleState(position=p, velocity=v, acceleration=u, time=t)

    def sample(self, times: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorized evaluation; times must lie inside the validity interval"""
        times = np.asarray(times, dtype=float)
        starts = np.array([seg.t_start for seg in self.segments])
        owner = np.clip(np.searchsorted(starts, times, side="right") - 1, 0, len(starts) - 1)
        p = np.empty_like(times)
        v = np.empty_like(times)
        u = np.empty_like(times)
        for idx, seg in enumerate(self.segments):
            mask = owner == idx
            if mask.any():
                p[mask], v[mask], u[mask] = seg.sample(times[mask])
        return p, v, u

    def states(self, times: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        p, v, _ = self.sample(times)
        return p, v

    def energy(self) -> float:
        return sum(seg.energy() for seg in self.segments)

    def concat(self, other: "Trajectory") -> "Trajectory":
        """Append a plan that starts where this one ends; landmarks merge, later wins"""
        return Trajectory(
            segments=self.segments + other.segments,
            light_position=other.light_position if other.light_position is not None else self.light_position,
            light_crossing_time=(
                self.light_crossing_time
                if self.light_crossing_time is not None
                else other.light_crossing_time
            ),
            exit_position=other.exit_position,
            exit_time=other.exit_time,
        )


def eval_state(traj: Trajectory, t: float) -> VehicleState:
    """Evaluate a trajectory at absolute time t"""
    return traj.state_at(t)


def crossing_time(traj: Trajectory, p_target: float) -> float:
    """
    Earliest time the (nondecreasing) trajectory reaches p_target.

    Args:
        traj: Trajectory with nondecreasing position
        p_target: Position to reach (m)

    Returns:
        Absolute crossing time, bracketed bisection to 1e-9 s
    """
    for seg in traj.segments:
        p_begin = seg.state_at(seg.t_start)[0]
        if p_begin >= p_target:
            return seg.t_start
        p_end = seg.state_at(seg.t_end)[0]
        if p_end < p_target - ROOT_TOLERANCE:
            continue
        if p_end <= p_target:
            return seg.t_end
        return bisect(
            lambda t: seg.state_at(t)[0] - p_target,
            seg.t_start,
            seg.t_end,
            xtol=ROOT_TOLERANCE,
        )
    raise NoCrossingError(
        f"trajectory ends at p={traj.end_state.position:.3f} before reaching {p_target}"
    )


def check_segment_bounds(segment: Segment, bounds: Bounds, margin: float = 1e-6) -> bool:
    """True when speed and acceleration stay inside the bounds on the whole segment"""
    v_lo, v_hi = segment.speed_range()
    if v_lo < bounds.v_min - margin or v_hi > bounds.v_max + margin:
        return False
    u_lo, u_hi = segment.acceleration_range()
    return u_lo >= bounds.u_min - margin and u_hi <= bounds.u_max + margin


def trajectory_within_bounds(traj: Trajectory, bounds: Bounds, margin: float = 1e-6) -> bool:
    return all(check_segment_bounds(seg, bounds, margin) for seg in traj.segments)


def satisfies_rear_end(
    follower: PlannedMotion,
    predecessor: Optional[PlannedMotion],
    standstill: float,
    reaction_time: float,
    grid_step: float = 0.01,
    margin: float = 1e-6,
    t_from: Optional[float] = None,
) -> bool:
    """
    Check p_k(t) - p_i(t) >= φ·v_i(t) + γ_k on the overlap of both plans.

    Args:
        follower: Plan of the following vehicle i
        predecessor: Plan or prediction of the vehicle k ahead on the same path
        standstill: γ_k of the predecessor (m)
        reaction_time: φ (s)
        grid_step: Sampling step of the pointwise check (s)
        margin: Numerical slack (m)
        t_from: Optional lower limit of the checked window

    Returns:
        True when the constraint holds at every grid point of the overlap
    """
    if predecessor is None:
        return True
    lo = max(follower.t_start, predecessor.t_start)
    if t_from is not None:
        lo = max(lo, t_from)
    hi = min(follower.t_end, predecessor.t_end)
    if hi < lo:
        return True
    count = int(np.floor((hi - lo) / grid_step)) + 1
    times = lo + grid_step * np.arange(count)
    if times[-1] < hi - TIME_TOLERANCE:
        times = np.append(times, hi)
    p_i, v_i = follower.states(times)
    p_k, _ = predecessor.states(times)
    slack = p_k - p_i - reaction_time * v_i - standstill
    return bool(np.all(slack >= -margin))
