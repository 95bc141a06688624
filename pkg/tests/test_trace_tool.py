"""
Tests for trace serialization, run-directory emission and the invariant checker
"""

import json

import pytest

from mixed_intersection.config.scenario_config import ScenarioConfig, SignalPolicy
from mixed_intersection.tools.metrics_tool import compute_metrics
from mixed_intersection.tools.signal_tool import SignalController, default_topology
from mixed_intersection.tools.trace_tool import (
    METRICS_FILE,
    TRACE_COLUMNS,
    TRACE_FILE,
    TraceFormatError,
    TraceRecord,
    check_run,
    emit,
    read_schedule,
    read_trace,
    records_to_frame,
)


@pytest.fixture
def config():
    return ScenarioConfig.build(policy="fixed", vehicle_count=2)


@pytest.fixture
def schedule_rows(config):
    controller = SignalController(default_topology(), SignalPolicy.FIXED, config.t_cycle, config.t_min)
    controller.update(config.resolved_t_update, list)
    return controller.schedule_rows()


def cruise_rows(vehicle_id, path, p0, v, times, vehicle_class="cav", mode="unconstrained"):
    return [
        TraceRecord(
            time=t,
            vehicle_id=vehicle_id,
            vehicle_class=vehicle_class,
            path=path,
            position=min(p0 + v * t, 300.0),
            velocity=v,
            acceleration=0.0,
            mode=mode,
            active_phase=0,
        ).as_row()
        for t in times
    ]


def write_run(out_dir, rows, config, schedule_rows):
    trace = records_to_frame(rows)
    metrics = compute_metrics(trace, config.zone_length)
    return emit(trace, schedule_rows, metrics, config, out_dir, planning_stats={"plans_committed": 1})


def test_records_to_frame_orders_rows():
    rows = cruise_rows(2, "NT", 0.0, 10.0, [1.0, 0.0]) + cruise_rows(1, "NT", 20.0, 10.0, [1.0, 0.0])
    frame = records_to_frame(rows)
    assert list(frame.columns) == TRACE_COLUMNS
    assert list(zip(frame["time"], frame["vehicle_id"])) == [(0.0, 1), (0.0, 2), (1.0, 1), (1.0, 2)]


def test_emit_round_trips(tmp_path, config, schedule_rows):
    rows = cruise_rows(1, "NT", 240.0, 10.0, [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    paths = write_run(tmp_path, rows, config, schedule_rows)

    trace = read_trace(paths["trace"])
    assert list(trace.columns) == TRACE_COLUMNS
    assert trace["position"].iloc[-1] == 300.0
    assert len(read_schedule(paths["schedule"])) == 8

    stored = json.loads((tmp_path / METRICS_FILE).read_text())
    assert stored["planning"] == {"plans_committed": 1}
    assert stored["vehicles"][0]["travel_time"] == 6.0

    report = check_run(tmp_path)
    assert report.passed, report.violations
    assert report.metrics_round_trip


def test_check_flags_red_light_crossing(tmp_path, config, schedule_rows):
    """ET is green only in [20, 30] of the first cycle"""
    rows = cruise_rows(1, "ET", 240.0, 10.0, [0.0, 1.0, 2.0])
    write_run(tmp_path, rows, config, schedule_rows)
    report = check_run(tmp_path)
    assert not report.passed
    assert report.red_light_crossings == 1


def test_check_flags_rear_end_and_collision(tmp_path, config, schedule_rows):
    times = [0.0, 1.0, 2.0]
    rows = (
        cruise_rows(1, "NT", 20.0, 10.0, times)
        + cruise_rows(2, "NT", 15.0, 10.0, times)
        + cruise_rows(3, "NT", 15.0, 10.0, times, vehicle_class="hdv", mode="idm")
    )
    write_run(tmp_path, rows, config, schedule_rows)
    report = check_run(tmp_path)
    assert not report.passed
    assert report.rear_end_violations >= 3
    assert report.collisions == 3


def test_check_flags_illegal_modes(tmp_path, config, schedule_rows):
    rows = cruise_rows(1, "NT", 0.0, 10.0, [0.0, 1.0], vehicle_class="hdv", mode="standby")
    write_run(tmp_path, rows, config, schedule_rows)
    report = check_run(tmp_path)
    assert any("illegal mode" in v for v in report.violations)


def test_check_flags_tampered_metrics(tmp_path, config, schedule_rows):
    rows = cruise_rows(1, "NT", 240.0, 10.0, [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    write_run(tmp_path, rows, config, schedule_rows)
    metrics_path = tmp_path / METRICS_FILE
    stored = json.loads(metrics_path.read_text())
    stored["mean_travel_time"] = 1.0
    metrics_path.write_text(json.dumps(stored))
    report = check_run(tmp_path)
    assert not report.metrics_round_trip
    assert not report.passed


def test_read_trace_rejects_foreign_header(tmp_path):
    path = tmp_path / TRACE_FILE
    path.write_text("t,id,p\n0,1,0\n")
    with pytest.raises(TraceFormatError):
        read_trace(path)
