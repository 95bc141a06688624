"""
Tests for the phase topology, phase pressure, the adaptive timing policy and the signal controller
"""

import numpy as np
import pytest
from pydantic import ValidationError

from mixed_intersection.config.scenario_config import ConfigError, SignalPolicy
from mixed_intersection.tools.signal_tool import (
    PhasePlan,
    PhaseTopology,
    SignalControlError,
    SignalController,
    VehicleSnapshot,
    default_topology,
    next_cycle_plan,
    pressure,
)
from mixed_intersection.tools.trajectory_tool import VehicleClass

CAV = VehicleClass.CAV
HDV = VehicleClass.HDV


@pytest.fixture
def topology():
    return default_topology()


def test_default_topology(topology):
    assert len(topology.paths) == 12
    assert topology.light_of("NR") == "N_through"
    assert topology.phase_of_path("NT") == 0
    assert topology.phase_of_path("SL") == 1
    assert topology.phase_of_path("ER") == 2
    assert topology.phase_of_path("WL") == 3
    with pytest.raises(SignalControlError):
        topology.light_of("XX")


def test_topology_rejects_shared_paths():
    with pytest.raises(ValidationError):
        PhaseTopology(
            light_paths={"a": ("NT",), "b": ("NT",), "c": ("ET",), "d": ("EL",)},
            phase_lights=(("a",), ("b",), ("c",), ("d",)),
        )
    with pytest.raises(ValidationError):
        PhaseTopology(
            light_paths={"a": ("NT",), "b": ("NL",), "c": ("ET",), "d": ("EL",)},
            phase_lights=(("a", "b"), ("b",), ("c",), ("d",)),
        )


def test_pressure_counts_waiting_vehicles(topology):
    snapshot = [
        VehicleSnapshot(path="NT", vehicle_class=CAV, standby=True),
        VehicleSnapshot(path="SR", vehicle_class=HDV, follows_idm=True, stopped=True),
        VehicleSnapshot(path="EL", vehicle_class=HDV, follows_idm=True, predicted_stop=True),
        VehicleSnapshot(path="WL", vehicle_class=HDV, follows_idm=True),
        VehicleSnapshot(path="ET", vehicle_class=CAV),
        VehicleSnapshot(path="ST", vehicle_class=CAV, standby=True, past_light=True),
    ]
    assert pressure(snapshot, topology) == [2.0, 0.0, 0.0, 1.0]


def test_next_cycle_plan_proportional_split():
    plan = next_cycle_plan([4.0, 2.0, 2.0, 0.0], t_cycle=40.0, t_min=5.0)
    assert plan.order == (0, 1, 2, 3)
    assert plan.durations_in_order() == pytest.approx((15.0, 10.0, 10.0, 5.0))
    assert sum(plan.durations) == pytest.approx(40.0)


def test_next_cycle_plan_orders_by_pressure():
    plan = next_cycle_plan([0.0, 1.0, 3.0, 1.0], t_cycle=40.0, t_min=5.0, cycle_start=40.0)
    assert plan.order == (2, 1, 3, 0)
    intervals = plan.phase_intervals()
    assert intervals[0] == (2, 40.0, pytest.approx(57.0))
    assert intervals[-1][2] == 80.0
    for (_, _, end), (_, start, _) in zip(intervals, intervals[1:]):
        assert end == start


def test_next_cycle_plan_zero_pressure_splits_equally():
    plan = next_cycle_plan([0.0] * 4, t_cycle=30.0, t_min=5.0)
    assert plan.durations == pytest.approx((7.5, 7.5, 7.5, 7.5))


def test_next_cycle_plan_rejects_short_cycle():
    with pytest.raises(ConfigError):
        next_cycle_plan([1.0] * 4, t_cycle=20.0, t_min=5.0)


def test_phase_plan_validation():
    with pytest.raises(ValidationError):
        PhasePlan(
            cycle_index=0, cycle_start=0.0, order=(0, 1, 2, 2), durations=(10.0,) * 4,
            t_cycle=40.0, t_min=5.0, t_update=20.0, broadcast_time=0.0,
        )
    with pytest.raises(ValidationError):
        PhasePlan(
            cycle_index=0, cycle_start=0.0, order=(0, 1, 2, 3), durations=(2.0, 12.0, 13.0, 13.0),
            t_cycle=40.0, t_min=5.0, t_update=20.0, broadcast_time=0.0,
        )


def test_fixed_controller_broadcasts_once_per_cycle(topology):
    controller = SignalController(topology, SignalPolicy.FIXED, t_cycle=40.0, t_min=5.0)
    assert not controller.update(19.9, list)
    assert controller.update(20.0, list)
    assert not controller.update(20.01, list)
    assert len(controller.plans) == 2
    assert controller.latest.cycle_start == 40.0
    assert controller.latest.broadcast_time == 20.0
    assert controller.green_windows("NT") == ((0.0, 10.0), (40.0, 50.0))


def test_adaptive_controller_follows_pressure(topology):
    controller = SignalController(topology, SignalPolicy.ADAPTIVE, t_cycle=40.0, t_min=5.0)
    waiting = [VehicleSnapshot(path="NT", vehicle_class=CAV, standby=True)]
    assert controller.update(20.0, lambda: waiting)
    assert controller.latest.durations == pytest.approx((25.0, 5.0, 5.0, 5.0))
    assert controller.green_windows("NT") == ((0.0, 10.0), (40.0, 65.0))
    assert controller.green_windows("NT", t_from=12.0) == ((40.0, 65.0),)
    assert controller.green_windows("EL", t_from=12.0) == ((30.0, 40.0), (75.0, 80.0))


def test_windows_merge_across_cycle_boundary(topology):
    """Phase 0 closes cycle 0 and opens cycle 1: one continuous window"""
    controller = SignalController(
        topology, SignalPolicy.ADAPTIVE, t_cycle=40.0, t_min=5.0, first_order=(1, 2, 3, 0)
    )
    controller.update(20.0, lambda: [VehicleSnapshot(path="ST", vehicle_class=CAV, standby=True)])
    assert controller.green_windows("ST") == ((30.0, 65.0),)


def test_active_phase_and_schedule(topology):
    controller = SignalController(
        topology, SignalPolicy.FIXED, t_cycle=40.0, t_min=5.0, first_durations=(25.0, 5.0, 5.0, 5.0)
    )
    assert controller.active_phase(5.0) == 0
    assert controller.active_phase(27.0) == 1
    assert controller.active_phase(39.9) == 3
    assert controller.active_phase(45.0) == -1
    assert controller.is_green("ER", 32.0)
    assert not controller.is_green("NT", 32.0)

    controller.update(20.0, list)
    assert controller.active_phase(45.0) == 0
    rows = controller.schedule_rows()
    assert len(rows) == 8
    assert rows[4]["cycle_index"] == 1
    assert rows[4]["green_end"] == 50.0


def test_controller_rejects_short_cycle(topology):
    with pytest.raises(ConfigError):
        SignalController(topology, SignalPolicy.FIXED, t_cycle=20.0, t_min=5.0)


def test_next_cycle_plan_random_pressures():
    """Any pressure vector: durations fill the cycle, respect the floor and follow the pressure order"""
    rng = np.random.default_rng(3)
    for _ in range(10_000):
        q = rng.integers(0, 12, size=4).astype(float) * rng.integers(0, 2, size=4)
        t_cycle = float(rng.choice([20.0, 30.0, 40.0, 60.0]))
        t_min = float(rng.uniform(0.5, t_cycle / 4.0 - 0.1))
        plan = next_cycle_plan(list(q), t_cycle=t_cycle, t_min=t_min)
        assert abs(sum(plan.durations) - t_cycle) < 1e-9
        assert min(plan.durations) >= t_min
        ordered = [q[p] for p in plan.order]
        assert ordered == sorted(ordered, reverse=True)
        for first, second in zip(plan.order, plan.order[1:]):
            assert plan.durations[first] >= plan.durations[second]


def test_broadcast_history_is_append_only(topology):
    """Each broadcast adds a cycle; nothing already broadcast is revised"""
    rng = np.random.default_rng(8)
    controller = SignalController(topology, SignalPolicy.ADAPTIVE, t_cycle=40.0, t_min=5.0)
    paths = list(topology.paths)
    for cycle in range(6):
        before_plans = list(controller.plans)
        before_rows = controller.schedule_rows()
        past = np.arange(0.0, controller.latest.cycle_end, 0.5)
        before_phases = [controller.active_phase(float(t)) for t in past]

        waiting = [
            VehicleSnapshot(path=str(rng.choice(paths)), vehicle_class=CAV, standby=True)
            for _ in range(int(rng.integers(0, 8)))
        ]
        assert controller.update(cycle * 40.0 + 20.0, lambda: waiting)

        assert controller.plans[: len(before_plans)] == before_plans
        assert controller.schedule_rows()[: len(before_rows)] == before_rows
        assert [controller.active_phase(float(t)) for t in past] == before_phases
        assert controller.latest.broadcast_time == cycle * 40.0 + 20.0
