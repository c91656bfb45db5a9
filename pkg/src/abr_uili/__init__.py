"""Discrete-event simulator for ABR rate control and use-it-or-lose-it policies."""

from .config import ConfigError, ScenarioConfig, load_config, preset
from .harness import build_scenario, run_config, run_scenario
from .policies import PolicyKind, PolicyVariant, Region
from .protocol import SourceParams, SourceState

__all__ = [
    "ConfigError", "ScenarioConfig", "load_config", "preset",
    "build_scenario", "run_config", "run_scenario",
    "PolicyKind", "PolicyVariant", "Region", "SourceParams", "SourceState",
]
__version__ = "0.1.0"
