"""
Tests for the per-CAV decision cascade
"""

import pytest

from mixed_intersection.tools.cav_planner_tool import (
    PlanningContext,
    build_unconstrained_trajectory,
    solve_unconstrained,
)
from mixed_intersection.tools.trace_tool import VehicleMode
from mixed_intersection.tools.trajectory_tool import (
    ConstAccelSegment,
    Trajectory,
    VehicleState,
    trajectory_within_bounds,
)
from mixed_intersection.workflows.decision_cascade import plan_cav, refine_plan


def context(bounds, windows, **extra):
    return PlanningContext(bounds=bounds, green_windows=windows, light_position=250.0, **extra)


def test_free_flow_is_unconstrained(bounds):
    outcome = plan_cav(context(bounds, ((0.0, 25.0),)), VehicleState(position=0.0, velocity=20.0, time=0.0), 300.0)
    assert outcome.mode == VehicleMode.UNCONSTRAINED
    assert outcome.clipped_green_start is None
    assert outcome.trajectory.exit_time == pytest.approx(15.0, abs=2e-3)
    assert outcome.trajectory.light_crossing_time == pytest.approx(12.5, abs=2e-3)


def test_green_onset_clips_the_window(bounds):
    outcome = plan_cav(context(bounds, ((20.0, 40.0),)), VehicleState(position=0.0, velocity=20.0, time=0.0), 300.0)
    assert outcome.mode == VehicleMode.UNCONSTRAINED
    assert outcome.clipped_green_start == 20.0
    assert outcome.trajectory.light_crossing_time >= 20.0 - 1e-9


def test_constrained_when_cubics_are_too_slow(bounds):
    """From rest 40 m before the light, only full acceleration makes the green ending at 4.2 s"""
    state = VehicleState(position=210.0, velocity=0.0, time=0.0)
    outcome = plan_cav(context(bounds, ((0.0, 4.2),)), state, 300.0)
    assert outcome.mode == VehicleMode.CONSTRAINED
    traj = outcome.trajectory
    assert traj.light_crossing_time == pytest.approx(4.0)
    assert traj.state_at(4.0).position == pytest.approx(250.0, abs=1e-6)
    assert traj.exit_position == pytest.approx(300.0)
    assert trajectory_within_bounds(traj, bounds)


def test_standby_when_no_green_is_reachable(bounds):
    state = VehicleState(position=0.0, velocity=10.0, time=1.0)
    outcome = plan_cav(context(bounds, ((0.0, 10.0),)), state, 300.0)
    assert outcome.mode == VehicleMode.STANDBY
    assert outcome.standby.stop_position == 250.0
    assert outcome.standby.stop_time == pytest.approx(76.0)

    summary = outcome.summary()
    assert summary["mode"] == "standby"
    assert summary["stop_time"] == pytest.approx(76.0)
    assert summary["emergency_stop"] is False


def test_past_the_light_only_the_exit_matters(bounds):
    outcome = plan_cav(context(bounds, ()), VehicleState(position=260.0, velocity=10.0, time=50.0), 300.0)
    assert outcome.mode == VehicleMode.UNCONSTRAINED
    assert outcome.trajectory.light_crossing_time is None
    assert outcome.trajectory.exit_position == pytest.approx(300.0)


def test_idm_fallback_when_even_braking_is_unsafe(bounds):
    parked = Trajectory(
        segments=(ConstAccelSegment(acceleration=0.0, p_start=210.0, v_start=0.0, t_start=0.0, t_end=300.0),)
    )
    ctx = context(bounds, ((0.0, 25.0),), predecessor=parked, predecessor_stopping=True)
    outcome = plan_cav(ctx, VehicleState(position=200.0, velocity=15.0, time=0.0), 300.0)
    assert outcome.mode == VehicleMode.IDM
    assert outcome.trajectory is None


def test_refine_adopts_only_earlier_exits(bounds):
    ctx = context(bounds, ((40.0, 65.0),))
    state = VehicleState(position=0.0, velocity=10.0, time=30.0)
    slow = build_unconstrained_trajectory(solve_unconstrained(0.0, 10.0, 30.0, 300.0, 110.0), 250.0)

    refined = refine_plan(ctx, state, 300.0, slow, green_start=40.0)
    assert refined is not None
    assert refined.exit_time < slow.exit_time
    assert 40.0 - 1e-9 <= refined.light_crossing_time <= 65.0

    assert refine_plan(ctx, state, 300.0, refined, green_start=40.0) is None
    assert refine_plan(ctx, state, 300.0, slow, green_start=12.0) is None
