from mixed_intersection.config.scenario_config import (
    ConfigError,
    ScenarioConfig,
    SignalPolicy,
    configure_logging,
    load_config,
)

__all__ = ["ConfigError", "ScenarioConfig", "SignalPolicy", "configure_logging", "load_config"]
