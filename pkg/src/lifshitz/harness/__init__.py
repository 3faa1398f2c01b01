"""Configuration, execution and persistence of experiments."""

from .config import ConfigError, ExperimentConfig, load_config, parse_config, serialize_config
from .records import ExperimentRecord, FlatTable, write_outputs
from .runner import TABLE_COLUMNS, ExperimentError, execute, run_experiment, table_from_record

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentError",
    "ExperimentRecord",
    "FlatTable",
    "TABLE_COLUMNS",
    "execute",
    "load_config",
    "parse_config",
    "run_experiment",
    "serialize_config",
    "table_from_record",
    "write_outputs",
]
