"""
Scenario configuration for Mixed Intersection Simulator
Flat key=value files parsed with python-dotenv and validated with pydantic
"""

import logging
import math
import os
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from mixed_intersection.tools.hdv_tool import IdmParams, RedLightDv
from mixed_intersection.tools.trajectory_tool import Bounds

logger = logging.getLogger(__name__)

CONFIG_ENV = "MIXED_INTERSECTION_CONFIG"
OUTPUT_DIR_ENV = "MIXED_INTERSECTION_OUTPUT_DIR"
LOG_LEVEL_ENV = "MIXED_INTERSECTION_LOG_LEVEL"


class ConfigError(Exception):
    """Raised for an unknown, malformed or inconsistent configuration key"""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class SignalPolicy(str, Enum):
    ADAPTIVE = "adaptive"
    FIXED = "fixed"


class ScenarioConfig(BaseModel):
    """Every knob of one simulation run, with the study's defaults"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    # geometry
    zone_length: float = Field(default=300.0, gt=0.0)
    light_offset: float = Field(default=50.0, ge=0.0)

    # CAV bounds
    v_min: float = 0.0
    v_max: float = 20.0
    u_min: float = -5.0
    u_max: float = 5.0
    reaction_time: float = Field(default=1.0, gt=0.0)
    cav_standstill: float = Field(default=3.0, gt=0.0)

    # human drivers
    hdv_standstill: float = Field(default=5.0, gt=0.0)
    v_des: float = Field(default=15.0, gt=0.0)
    idm_delta: float = Field(default=4.0, ge=1.0)
    time_headway: float = Field(default=1.5, gt=0.0)
    comfortable_decel: float = Field(default=2.0, gt=0.0)
    red_light_dv: RedLightDv = RedLightDv.STATIONARY
    hdv_amber_time: float = Field(default=3.0, ge=0.0)
    hdv_noise_std: float = Field(default=0.0, ge=0.0)

    # signal
    penetration: float = Field(default=0.7, ge=0.0, le=1.0)
    policy: SignalPolicy = SignalPolicy.ADAPTIVE
    t_cycle: float = Field(default=40.0, gt=0.0)
    t_min: float = Field(default=5.0, gt=0.0)
    t_update: Optional[float] = None
    first_cycle_order: Tuple[int, ...] = (0, 1, 2, 3)
    first_cycle_durations: Optional[Tuple[float, ...]] = None
    fixed_durations: Optional[Tuple[float, ...]] = None

    # arrivals
    arrival_rate: float = Field(default=0.03, gt=0.0)
    entry_speed_min: float = Field(default=10.0, ge=0.0)
    entry_speed_max: float = Field(default=15.0, ge=0.0)
    vehicle_count: int = Field(default=200, ge=0)
    seed: int = 0

    # numerics
    step: float = Field(default=0.01, gt=0.0)
    horizon: float = Field(default=900.0, gt=0.0)
    delta_t: float = Field(default=0.1, gt=0.0)
    check_grid: float = Field(default=0.01, gt=0.0)
    t_cap: float = Field(default=120.0, gt=0.0)
    deviation_threshold: float = Field(default=2.0, gt=0.0)
    prediction_step: float = Field(default=0.01, gt=0.0)
    prediction_horizon: float = Field(default=60.0, gt=0.0)
    monitor_interval: float = Field(default=0.01, gt=0.0)
    replan_backoff: float = Field(default=0.5, ge=0.0)
    max_steps: Optional[int] = Field(default=None, gt=0)
    strict_safety: bool = True

    @field_validator("first_cycle_order", "first_cycle_durations", "fixed_durations", mode="before")
    @classmethod
    def _split_csv(cls, value: Any) -> Any:
        if isinstance(value, str):
            return tuple(item.strip() for item in value.split(",") if item.strip())
        return value

    @model_validator(mode="after")
    def _check_consistency(self) -> "ScenarioConfig":
        if not self.v_min < self.v_max:
            raise ConfigError("v_min", f"v_min ({self.v_min}) must be below v_max ({self.v_max})")
        if self.u_min >= 0.0:
            raise ConfigError("u_min", f"u_min ({self.u_min}) must be negative")
        if self.u_max <= 0.0:
            raise ConfigError("u_max", f"u_max ({self.u_max}) must be positive")
        if self.light_offset >= self.zone_length:
            raise ConfigError("light_offset", "the light must lie inside the control zone")
        if self.t_cycle <= 4.0 * self.t_min:
            raise ConfigError(
                "t_cycle", f"t_cycle ({self.t_cycle}) must exceed 4*t_min ({4.0 * self.t_min})"
            )
        t_update = self.resolved_t_update
        if not 0.0 < t_update < self.t_cycle:
            raise ConfigError("t_update", f"t_update ({t_update}) must lie inside (0, t_cycle)")
        if self.prediction_horizon < t_update:
            raise ConfigError("prediction_horizon", "prediction horizon must cover t_update")
        if self.entry_speed_min > self.entry_speed_max:
            raise ConfigError("entry_speed_min", "entry_speed_min exceeds entry_speed_max")
        if self.entry_speed_max > self.v_max or self.entry_speed_min < self.v_min:
            raise ConfigError("entry_speed_max", "entry speeds must respect [v_min, v_max]")
        if sorted(self.first_cycle_order) != [0, 1, 2, 3]:
            raise ConfigError("first_cycle_order", f"{self.first_cycle_order} is not a permutation of 0..3")
        for key in ("first_cycle_durations", "fixed_durations"):
            durations = getattr(self, key)
            if durations is None:
                continue
            if len(durations) != 4:
                raise ConfigError(key, f"expected 4 durations, got {len(durations)}")
            if abs(sum(durations) - self.t_cycle) > 1e-9:
                raise ConfigError(key, f"durations sum to {sum(durations)}, not t_cycle={self.t_cycle}")
            if min(durations) < self.t_min:
                raise ConfigError(key, f"every duration must be at least t_min={self.t_min}")
        if self.step > self.check_grid + 1e-12 and self.strict_safety:
            logger.warning(f"⚠️ step {self.step} is coarser than check_grid {self.check_grid}")
        return self

    @property
    def light_position(self) -> float:
        return self.zone_length - self.light_offset

    @property
    def resolved_t_update(self) -> float:
        return self.t_cycle / 2.0 if self.t_update is None else self.t_update

    @property
    def resolved_max_steps(self) -> int:
        return self.max_steps if self.max_steps is not None else int(math.ceil(self.horizon / self.step))

    @property
    def bounds(self) -> Bounds:
        return Bounds(
            v_min=self.v_min,
            v_max=self.v_max,
            u_min=self.u_min,
            u_max=self.u_max,
            reaction_time=self.reaction_time,
        )

    @property
    def idm_params(self) -> IdmParams:
        return IdmParams(
            v_des=self.v_des,
            u_max=self.u_max,
            u_min=self.u_min,
            delta=self.idm_delta,
            standstill=self.hdv_standstill,
            time_headway=self.time_headway,
            comfortable_decel=self.comfortable_decel,
            red_light_dv=self.red_light_dv,
        )

    @classmethod
    def build(cls, **values: Any) -> "ScenarioConfig":
        """Validate values, reporting the first offending key as a ConfigError"""
        unknown = sorted(set(values) - set(cls.model_fields))
        if unknown:
            raise ConfigError(unknown[0], "unknown configuration key")
        try:
            return cls(**values)
        except ValidationError as e:
            error = e.errors()[0]
            key = str(error["loc"][0]) if error["loc"] else "config"
            raise ConfigError(key, error["msg"]) from e

    def with_overrides(self, **overrides: Any) -> "ScenarioConfig":
        values = self.model_dump(exclude_unset=True)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return ScenarioConfig.build(**values)


def load_config(path: Union[str, Path]) -> ScenarioConfig:
    """
    Load a flat key=value scenario file; absent keys take their defaults.

    Args:
        path: Path to the configuration file

    Returns:
        Fully populated ScenarioConfig
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config", f"configuration file {path} not found")
    raw = dotenv_values(path)
    values: Dict[str, Any] = {}
    for key, value in raw.items():
        name = key.strip().lower()
        if value is None:
            raise ConfigError(name, "missing '=' and value")
        if value.strip() == "":
            continue
        values[name] = value.strip()
    config = ScenarioConfig.build(**values)
    logger.info(f"✅ Loaded scenario config from {path} ({len(values)} keys set)")
    return config


def load_environment() -> None:
    """Load .env from the working directory or the project root"""
    candidates = [
        Path.cwd() / ".env",
        Path(__file__).resolve().parents[3] / ".env",
    ]
    for candidate in candidates:
        if candidate.is_file():
            load_dotenv(candidate)
            logger.debug(f"🔍 Loaded environment from {candidate}")
            return


def configure_logging() -> None:
    load_environment()
    level = os.getenv(LOG_LEVEL_ENV, "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


def default_config_path() -> Optional[str]:
    return os.getenv(CONFIG_ENV)


def default_output_dir() -> str:
    return os.getenv(OUTPUT_DIR_ENV, "runs")
