"""
Tests for scenario configuration loading and validation
"""

from pathlib import Path

import pytest

from mixed_intersection.config.scenario_config import (
    ConfigError,
    ScenarioConfig,
    SignalPolicy,
    load_config,
)
from mixed_intersection.tools.hdv_tool import RedLightDv


def write_config(tmp_path, text):
    path = tmp_path / "scenario.env"
    path.write_text(text)
    return path


def test_defaults_match_the_study_setup():
    config = ScenarioConfig()
    assert config.zone_length == 300.0
    assert config.light_position == 250.0
    assert config.resolved_t_update == 20.0
    assert config.resolved_max_steps == 90_000
    assert config.bounds.v_max == 20.0
    assert config.bounds.reaction_time == 1.0
    assert config.idm_params.standstill == 5.0
    assert config.idm_params.v_des == 15.0
    assert config.policy == SignalPolicy.ADAPTIVE


def test_load_config_parses_values(tmp_path):
    path = write_config(
        tmp_path,
        "# two-phase-heavy scenario\n"
        "POLICY=fixed\n"
        "t_cycle=30\n"
        "fixed_durations=10,5,10,5\n"
        "penetration=0.5\n"
        "red_light_dv=zero\n"
        "seed=\n",
    )
    config = load_config(path)
    assert config.policy == SignalPolicy.FIXED
    assert config.t_cycle == 30.0
    assert config.fixed_durations == (10.0, 5.0, 10.0, 5.0)
    assert config.penetration == 0.5
    assert config.red_light_dv == RedLightDv.ZERO
    assert config.seed == 0


@pytest.mark.parametrize(
    "text, key",
    [
        ("zone_lenght=300\n", "zone_lenght"),
        ("penetration=1.5\n", "penetration"),
        ("t_cycle=20\n", "t_cycle"),
        ("first_cycle_durations=10,10,10,5\n", "first_cycle_durations"),
        ("first_cycle_order=0,1,1,3\n", "first_cycle_order"),
        ("light_offset=400\n", "light_offset"),
        ("entry_speed_max=25\n", "entry_speed_max"),
        ("t_update=45\n", "t_update"),
        ("vehicle_count=many\n", "vehicle_count"),
    ],
)
def test_load_config_names_the_offending_key(tmp_path, text, key):
    with pytest.raises(ConfigError) as excinfo:
        load_config(write_config(tmp_path, text))
    assert excinfo.value.key == key
    assert str(excinfo.value).startswith(f"{key}: ")


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError) as excinfo:
        load_config(tmp_path / "absent.env")
    assert excinfo.value.key == "config"


def test_line_without_value_is_rejected(tmp_path):
    with pytest.raises(ConfigError) as excinfo:
        load_config(write_config(tmp_path, "seed=3\nstrict_safety\n"))
    assert excinfo.value.key == "strict_safety"


def test_with_overrides_keeps_explicit_values():
    base = ScenarioConfig.build(t_cycle=30.0, vehicle_count=12)
    changed = base.with_overrides(seed=4, penetration=None)
    assert changed.seed == 4
    assert changed.t_cycle == 30.0
    assert changed.vehicle_count == 12
    assert changed.penetration == base.penetration


def test_with_overrides_validates():
    with pytest.raises(ConfigError):
        ScenarioConfig().with_overrides(t_min=12.0)


def test_shipped_default_file_matches_built_in_defaults():
    path = Path(__file__).resolve().parents[1] / "configs" / "default.env"
    assert load_config(path).model_dump() == ScenarioConfig().model_dump()
