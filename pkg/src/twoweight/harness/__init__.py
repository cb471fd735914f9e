"""Experiment configuration, sweeps and the command-line interface."""
from .config import ExperimentConfig, load_config, parse_config
from .experiments import (TheoremCheckRow, evaluate_pair, power_weight, power_weight_pair,
                          refinement_study, run_constants, run_sweep)

__all__ = ["ExperimentConfig", "TheoremCheckRow", "evaluate_pair", "load_config",
           "parse_config", "power_weight", "power_weight_pair", "refinement_study",
           "run_constants", "run_sweep"]
