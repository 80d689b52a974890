"""
Core components for hivst: settings, logging and errors
"""

from .config import RunConfig, Settings, load_run_config, settings
from .errors import (
    CalibrationError,
    ConfigError,
    DataError,
    DegenerateJurisdiction,
    HivstError,
    NoSignChange,
    NumericalError,
    ParameterError,
)

__all__ = [
    "settings",
    "Settings",
    "RunConfig",
    "load_run_config",
    "HivstError",
    "ConfigError",
    "DataError",
    "ParameterError",
    "CalibrationError",
    "DegenerateJurisdiction",
    "NumericalError",
    "NoSignChange",
]
