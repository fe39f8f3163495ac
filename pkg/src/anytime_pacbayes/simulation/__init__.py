from .bounds import ALL_KINDS, BoundSpec
from .config import load_config, parse_config
from .engine import (
    WORKERS_ENV,
    CoverageReport,
    Experiment,
    ExperimentConfig,
    ScenarioConfig,
    Trace,
    coverage,
    gibbs_posterior,
    run_trajectory,
)
from .scenarios import SCENARIO_KINDS, make_scenario

__all__ = [
    "ALL_KINDS",
    "BoundSpec",
    "CoverageReport",
    "Experiment",
    "ExperimentConfig",
    "SCENARIO_KINDS",
    "ScenarioConfig",
    "Trace",
    "WORKERS_ENV",
    "coverage",
    "gibbs_posterior",
    "load_config",
    "make_scenario",
    "parse_config",
    "run_trajectory",
]
