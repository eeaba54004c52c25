"""Simulator of the SMQKA multi-party quantum key agreement protocol and its participant attacks."""

from .analysis import (
    TrialAggregate,
    detection_probability_oracle,
    monte_carlo,
    qubit_efficiency,
    xor_oracle,
)
from .config import ConfigError, ScenarioConfig, parse_config, serialize_config
from .protocol import RunReport, SubSecretKey, run_protocol
from .qubit import Basis, PureState

__all__ = [
    "Basis",
    "ConfigError",
    "PureState",
    "RunReport",
    "ScenarioConfig",
    "SubSecretKey",
    "TrialAggregate",
    "detection_probability_oracle",
    "monte_carlo",
    "parse_config",
    "qubit_efficiency",
    "run_protocol",
    "serialize_config",
    "xor_oracle",
]
