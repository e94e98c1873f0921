"""Configuration-driven benchmark runner for the rotated-square and perforated-plate studies."""
from .config import (BenchmarkConfig, ConfigError, SweepSpec, config_from_dict, load_config, load_sweep,
                     sweep_from_dict)
from .problems import Problem, build_problem
from .runner import SWEEP_COLUMNS, render_tables, run, solve_problem, sweep

__all__ = ["BenchmarkConfig", "ConfigError", "SweepSpec", "config_from_dict", "load_config", "load_sweep",
           "sweep_from_dict", "Problem", "build_problem", "SWEEP_COLUMNS", "render_tables", "run",
           "solve_problem", "sweep"]
