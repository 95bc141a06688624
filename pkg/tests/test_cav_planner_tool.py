"""
Tests for the unconstrained cubic solve, the feasible exit-time range and the minimum exit-time search
"""

import numpy as np
import pytest

from mixed_intersection.tools.cav_planner_tool import (
    DegenerateHorizonError,
    InfeasibleStateError,
    PlannerError,
    PlanningContext,
    build_unconstrained_trajectory,
    feasible_exit_range,
    in_green,
    min_exit_time_search,
    rear_end_ok,
    solve_unconstrained,
)
from mixed_intersection.tools.trajectory_tool import (
    ConstAccelSegment,
    Trajectory,
    VehicleState,
    check_segment_bounds,
    satisfies_rear_end,
)


def cruise(p0, v, t0, t1):
    return Trajectory(
        segments=(ConstAccelSegment(acceleration=0.0, p_start=p0, v_start=v, t_start=t0, t_end=t1),)
    )


def test_solve_unconstrained_boundary_conditions():
    seg = solve_unconstrained(0.0, 10.0, 2.0, 300.0, 22.0)
    p0, v0, _ = seg.state_at(2.0)
    pf, vf, uf = seg.state_at(22.0)
    assert p0 == pytest.approx(0.0, abs=1e-9)
    assert v0 == pytest.approx(10.0, abs=1e-9)
    assert pf == pytest.approx(300.0, abs=1e-8)
    assert uf == pytest.approx(0.0, abs=1e-9)
    assert vf == pytest.approx(1.5 * 300.0 / 20.0 - 0.5 * 10.0)


def test_solve_unconstrained_degenerate_horizon():
    with pytest.raises(DegenerateHorizonError):
        solve_unconstrained(0.0, 10.0, 5.0, 300.0, 5.0)


def test_exit_range_at_top_speed(bounds):
    """From 20 m/s the earliest exit keeps the speed (15 s), the latest ends at rest (45 s)"""
    rng = feasible_exit_range(0.0, 20.0, 0.0, 300.0, bounds)
    assert rng.lower == pytest.approx(15.0, abs=2e-3)
    assert rng.upper == pytest.approx(45.0, abs=2e-3)

    fast, slow = rng.boundary_cubics()
    assert check_segment_bounds(fast, bounds)
    assert check_segment_bounds(slow, bounds)


def test_exit_range_keeps_first_run_when_braking_splits_it(bounds):
    """
    20 m/s with 56 m to go: decelerations needed around T = 2D/v0 exceed u_min, so the
    feasible horizons are [2.8, 4.451] and [7.549, 8.4]; only the first is returned
    """
    rng = feasible_exit_range(244.0, 20.0, 0.0, 300.0, bounds)
    assert rng.lower == pytest.approx(2.8, abs=2e-3)
    assert rng.upper == pytest.approx(6.0 - np.sqrt(2.4), abs=2e-3)
    for tf in np.arange(rng.lower, rng.upper, 0.01):
        assert check_segment_bounds(solve_unconstrained(244.0, 20.0, 0.0, 300.0, float(tf)), bounds)
    assert not check_segment_bounds(solve_unconstrained(244.0, 20.0, 0.0, 300.0, 6.0), bounds)
    assert check_segment_bounds(solve_unconstrained(244.0, 20.0, 0.0, 300.0, 8.0), bounds)


def test_exit_range_from_rest_is_capped(bounds):
    """From rest the terminal speed limit decides the lower bound; nothing limits the upper"""
    rng = feasible_exit_range(0.0, 0.0, 10.0, 300.0, bounds, t_cap=120.0)
    assert rng.lower == pytest.approx(10.0 + 22.5, abs=2e-3)
    assert rng.upper == pytest.approx(10.0 + 120.0)


def test_exit_range_boundaries_are_tight(bounds):
    """Just inside the range the cubic is feasible, just outside it is not"""
    rng = feasible_exit_range(0.0, 12.0, 0.0, 300.0, bounds)
    inside_lo = solve_unconstrained(0.0, 12.0, 0.0, 300.0, rng.lower + 0.01)
    outside_lo = solve_unconstrained(0.0, 12.0, 0.0, 300.0, rng.lower - 0.01)
    inside_hi = solve_unconstrained(0.0, 12.0, 0.0, 300.0, rng.upper - 0.01)
    outside_hi = solve_unconstrained(0.0, 12.0, 0.0, 300.0, rng.upper + 0.01)
    assert check_segment_bounds(inside_lo, bounds)
    assert not check_segment_bounds(outside_lo, bounds)
    assert check_segment_bounds(inside_hi, bounds)
    assert not check_segment_bounds(outside_hi, bounds)


def test_exit_range_rejects_bad_anchors(bounds):
    with pytest.raises(InfeasibleStateError):
        feasible_exit_range(0.0, 25.0, 0.0, 300.0, bounds)
    with pytest.raises(PlannerError):
        feasible_exit_range(300.0, 10.0, 0.0, 300.0, bounds)


def test_in_green():
    assert in_green(5.0, None)
    assert in_green(5.0, ((0.0, 10.0),))
    assert not in_green(12.0, ((0.0, 10.0), (20.0, 30.0)))
    assert in_green(20.0, ((0.0, 10.0), (20.0, 30.0)))
    assert not in_green(5.0, ())


def test_context_rejects_overlapping_windows():
    with pytest.raises(ValueError):
        PlanningContext(green_windows=((0.0, 10.0), (5.0, 20.0)))
    with pytest.raises(ValueError):
        PlanningContext(green_windows=((10.0, 10.0),))


def test_search_free_road(bounds):
    """No light, no predecessor: the earliest feasible exit time is taken"""
    ctx = PlanningContext(bounds=bounds)
    traj = min_exit_time_search(ctx, VehicleState(position=0.0, velocity=20.0, time=0.0), 300.0)
    assert traj is not None
    assert traj.exit_time == pytest.approx(15.0, abs=2e-3)
    assert traj.exit_position == pytest.approx(300.0)
    assert traj.light_crossing_time is None


def test_search_waits_for_green(bounds):
    """The fastest cubic would reach the light at 12.5 s; green only opens at 20 s"""
    ctx = PlanningContext(bounds=bounds, green_windows=((20.0, 40.0),), light_position=250.0)
    traj = min_exit_time_search(ctx, VehicleState(position=0.0, velocity=20.0, time=0.0), 300.0)
    assert traj is not None
    assert 20.0 - 1e-9 <= traj.light_crossing_time <= 40.0

    earlier = solve_unconstrained(0.0, 20.0, 0.0, 300.0, traj.exit_time - ctx.delta_t)
    p_at_green, _, _ = earlier.state_at(20.0)
    assert p_at_green >= 250.0, "one step earlier would already cross on red"


def test_search_returns_none_when_green_unreachable(bounds):
    ctx = PlanningContext(bounds=bounds, green_windows=((1.0, 2.0),), light_position=250.0)
    assert min_exit_time_search(ctx, VehicleState(position=0.0, velocity=10.0, time=0.0), 300.0) is None


def test_search_keeps_distance_to_predecessor(bounds):
    leader = cruise(40.0, 10.0, 0.0, 30.0)
    ctx = PlanningContext(bounds=bounds, predecessor=leader, standstill=3.0)
    traj = min_exit_time_search(ctx, VehicleState(position=0.0, velocity=10.0, time=0.0), 300.0)
    assert traj is not None
    assert traj.exit_time <= 30.0 + ctx.delta_t
    assert satisfies_rear_end(traj, leader, standstill=3.0, reaction_time=1.0, grid_step=0.001, margin=1e-3)

    free = min_exit_time_search(PlanningContext(bounds=bounds), VehicleState(position=0.0, velocity=10.0, time=0.0), 300.0)
    assert free.exit_time < traj.exit_time


def test_search_minimality_against_scan(bounds):
    """Randomized anchors: nothing on the 10 ms grid below the returned exit time is feasible"""
    rng = np.random.default_rng(7)
    ctx = PlanningContext(bounds=bounds)
    for _ in range(20):
        v0 = float(rng.uniform(0.0, 20.0))
        p0 = float(rng.uniform(0.0, 200.0))
        traj = min_exit_time_search(ctx, VehicleState(position=p0, velocity=v0, time=0.0), 300.0)
        assert traj is not None
        for tf in np.arange(0.05, traj.exit_time - 0.01, 0.01):
            seg = solve_unconstrained(p0, v0, 0.0, 300.0, float(tf))
            assert not check_segment_bounds(seg, bounds, margin=-1e-6)


def _first_feasible_on_fine_grid(ctx, anchor, pf, step=1e-3):
    """Exhaustive scan of every exit time on a 1 ms grid; endpoint limits prune the grid first"""
    bounds = ctx.bounds
    distance = pf - anchor.position
    horizons = step * np.arange(1, int(round(ctx.t_cap / step)) + 1)
    terminal_speed = 1.5 * distance / horizons - 0.5 * anchor.velocity
    initial_accel = 3.0 * (distance - anchor.velocity * horizons) / horizons ** 2
    plausible = (
        (terminal_speed >= bounds.v_min - 1e-3)
        & (terminal_speed <= bounds.v_max + 1e-3)
        & (initial_accel >= bounds.u_min - 1e-3)
        & (initial_accel <= bounds.u_max + 1e-3)
    )
    for horizon in horizons[plausible]:
        tf = anchor.time + float(horizon)
        seg = solve_unconstrained(anchor.position, anchor.velocity, anchor.time, pf, tf)
        if not check_segment_bounds(seg, bounds):
            continue
        traj = build_unconstrained_trajectory(seg, ctx.light_position)
        if not in_green(traj.light_crossing_time, ctx.green_windows):
            continue
        if rear_end_ok(traj, ctx):
            return tf
    return None


@pytest.mark.slow
def test_search_against_fine_grid_with_light_and_leader(bounds):
    """100 scenarios with a light and a leader: the search is within one step of the 1 ms optimum"""
    rng = np.random.default_rng(21)
    found = 0
    for _ in range(100):
        p0 = float(rng.uniform(0.0, 100.0))
        v0 = float(rng.uniform(5.0, 20.0))
        onset = float(rng.uniform(0.0, 30.0))
        green = float(rng.uniform(8.0, 20.0))
        windows = tuple((onset + k * 40.0, onset + k * 40.0 + green) for k in range(4))
        gap = 3.0 + v0 + float(rng.uniform(15.0, 50.0))
        leader = cruise(p0 + gap, v0 * float(rng.uniform(0.6, 1.0)), 0.0, 200.0)
        ctx = PlanningContext(
            bounds=bounds, green_windows=windows, light_position=250.0, predecessor=leader, standstill=3.0
        )
        anchor = VehicleState(position=p0, velocity=v0, time=0.0)

        oracle = _first_feasible_on_fine_grid(ctx, anchor, 300.0)
        traj = min_exit_time_search(ctx, anchor, 300.0)
        if oracle is None:
            assert traj is None
            continue
        found += 1
        assert traj is not None
        assert oracle - 1e-3 <= traj.exit_time <= oracle + ctx.delta_t + 1e-3
    assert found >= 25
