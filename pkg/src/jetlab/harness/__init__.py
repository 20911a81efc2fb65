"""Configuration, experiment runner and command line."""
from ..polyjet.expression import parse_field_expression
from .config import (DEFAULT_GRID, MODES, SCHEMA, ConfigError, ExperimentConfig, config_hash,
                     load_config, make_config, validate)
from .report import OutputWriter, RunManifest
from .runner import EXIT_CHECKS, EXIT_ERROR, EXIT_OK, run_experiment

__all__ = ["parse_field_expression", "DEFAULT_GRID", "MODES", "SCHEMA", "ConfigError",
           "ExperimentConfig", "config_hash", "load_config", "make_config", "validate",
           "OutputWriter", "RunManifest", "EXIT_CHECKS", "EXIT_ERROR", "EXIT_OK",
           "run_experiment"]
