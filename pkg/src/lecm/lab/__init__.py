"""Experiment drivers, output writers and the command-line interface."""

from .config import ConfigError, ExperimentConfig
from .experiments import LengthEstimate, SweepRow, length_estimate

__all__ = ["ConfigError", "ExperimentConfig", "LengthEstimate", "SweepRow", "length_estimate"]
