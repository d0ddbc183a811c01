"""Configuration, sweep execution, CSV output and the command-line interface."""

from .config import ExperimentConfig, load_config, parse_config
from .experiments import build_experiment, run_experiment
from .results import Cell, SweepResult, read_csv, write_csv, write_manifest

__all__ = [
    "Cell",
    "ExperimentConfig",
    "SweepResult",
    "build_experiment",
    "load_config",
    "parse_config",
    "read_csv",
    "run_experiment",
    "write_csv",
    "write_manifest",
]
