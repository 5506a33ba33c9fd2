"""Unique-word OFDM baseband link lab."""

from .core import (
    EnergyReport,
    GeneratorSet,
    SystemConfig,
    build_generator_set,
    energy_report,
    load_config,
    optimize_redundant_placement,
    default_config,
)
from .errors import ConfigError, NumericalError, UwOfdmError

__all__ = [
    "ConfigError",
    "EnergyReport",
    "GeneratorSet",
    "NumericalError",
    "SystemConfig",
    "UwOfdmError",
    "build_generator_set",
    "energy_report",
    "load_config",
    "optimize_redundant_placement",
    "default_config",
]
