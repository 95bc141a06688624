"""
Async tests for the MCP tool functions
"""

import json

import pytest

from mixed_intersection import server
from mixed_intersection.config.scenario_config import CONFIG_ENV


@pytest.fixture(autouse=True)
def no_ambient_config(monkeypatch):
    monkeypatch.delenv(CONFIG_ENV, raising=False)


@pytest.mark.asyncio
async def test_latest_stop_time():
    """10 m/s with 40 m to go: t_s = 3d/v0 = 12 s and u_c = -5/3 is within bounds"""
    result = json.loads(await server.latest_stop_time(velocity=10.0, distance=40.0))
    assert result["stop_time"] == pytest.approx(12.0)
    assert result["critical_acceleration"] == pytest.approx(-5.0 / 3.0)
    assert result["cubic_feasible"] is True

    harsh = json.loads(await server.latest_stop_time(velocity=25.0, distance=40.0))
    assert harsh["cubic_feasible"] is False


@pytest.mark.asyncio
async def test_latest_stop_time_wraps_errors():
    with pytest.raises(RuntimeError, match="Failed to compute latest stop time"):
        await server.latest_stop_time(velocity=0.0, distance=40.0)


@pytest.mark.asyncio
async def test_plan_single_cav_free_flow():
    result = json.loads(
        await server.plan_single_cav(position=0.0, velocity=20.0, green_windows=[[0.0, 25.0]])
    )
    assert result["mode"] == "unconstrained"


@pytest.mark.asyncio
async def test_plan_single_cav_standby():
    result = json.loads(
        await server.plan_single_cav(position=0.0, velocity=10.0, time=1.0, green_windows=[[0.0, 10.0]])
    )
    assert result["mode"] == "standby"
    assert result["stop_time"] == pytest.approx(76.0)


@pytest.mark.asyncio
async def test_run_scenario_then_check(tmp_path):
    config_path = tmp_path / "small.env"
    config_path.write_text("vehicle_count=1\nmonitor_interval=0.1\n")
    run_dir = tmp_path / "run"

    summary = json.loads(
        await server.run_scenario(config_path=str(config_path), seed=1, policy="fixed", out_dir=str(run_dir))
    )
    assert summary["complete"] is True
    assert summary["exited_count"] == 1
    assert summary["planning"]["safety_breaches"] == 0

    report = json.loads(await server.check_run(str(run_dir)))
    assert report["passed"] is True


@pytest.mark.asyncio
async def test_check_run_wraps_missing_directory(tmp_path):
    with pytest.raises(RuntimeError, match="Failed to check run"):
        await server.check_run(str(tmp_path / "absent"))
