"""Discrete-event study of stale SDN controller views and a K-means anomaly IDS."""

from .config import ConfigError, ScenarioConfig, parse_config
from .scenario import InvariantViolation, run_once

__all__ = ["ConfigError", "InvariantViolation", "ScenarioConfig", "parse_config", "run_once"]
__version__ = "0.1.0"
