"""Configuration, experiment runners and the ``ntklab`` CLI."""
from .config import DEFAULTS, ExperimentConfig, resolve
from .experiments import SUBCOMMANDS, RunReport, run

__all__ = ["DEFAULTS", "ExperimentConfig", "RunReport", "SUBCOMMANDS", "resolve", "run"]
