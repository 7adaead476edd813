"""Experiment configuration, Monte-Carlo driver and result output."""

from .config import FIGURES, ExperimentConfig, figure_recipes, load_config, parse_config
from .output import RATE_COLUMNS, OutputError, emit_csv, read_csv, render_plot
from .runner import (
    BLOCK_TRIALS,
    ConvergenceRecord,
    GapRecord,
    draw_trials,
    precode,
    resolve_gamma,
    run,
    run_convergence,
    run_experiment,
    run_gap,
)

__all__ = [
    "FIGURES",
    "ExperimentConfig",
    "figure_recipes",
    "load_config",
    "parse_config",
    "RATE_COLUMNS",
    "OutputError",
    "emit_csv",
    "read_csv",
    "render_plot",
    "BLOCK_TRIALS",
    "ConvergenceRecord",
    "GapRecord",
    "draw_trials",
    "precode",
    "resolve_gamma",
    "run",
    "run_convergence",
    "run_experiment",
    "run_gap",
]
