"""Configuration, scenario orchestration, records and the command line."""

from .config import ExperimentConfig, SCENARIO_NAMES, default_config, load_config
from .records import CSV_COLUMNS, Quantity, ResultRecord, emit, load_record
from .scenarios import SCENARIOS, run_scenario

__all__ = [
    "ExperimentConfig",
    "SCENARIO_NAMES",
    "default_config",
    "load_config",
    "Quantity",
    "ResultRecord",
    "CSV_COLUMNS",
    "emit",
    "load_record",
    "SCENARIOS",
    "run_scenario",
]
