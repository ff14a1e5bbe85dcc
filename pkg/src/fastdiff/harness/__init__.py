"""Experiment harness: config files, orchestrated runs, sweeps, exports."""

from .config import ExperimentConfig, InitialSpec, NormSpec, load_config, parse_config
from .export import export, trajectory_csv
from .run import RunReport, SweepResult, parse_axis, run, sweep

__all__ = [
    "ExperimentConfig",
    "InitialSpec",
    "NormSpec",
    "RunReport",
    "SweepResult",
    "export",
    "load_config",
    "parse_axis",
    "parse_config",
    "run",
    "sweep",
    "trajectory_csv",
]
