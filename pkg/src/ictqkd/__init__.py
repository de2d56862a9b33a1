"""Decoy-state QKD security analysis under correlated intensity fluctuations."""

from .cauchy_schwarz import g_bounds, linearize_cs
from .channel import ChannelParams, GroundTruthCorrelation, simulate_monitor_clicks
from .config import ConfigError, RunConfig, parse_config
from .decoy_lp import LinearProgram, ObservedStatistics, build_error_lp, build_yield_lp
from .keyrate import (
    KeyRateResult,
    Scenario,
    StageError,
    distance_sweep,
    evaluate_scenario,
    optimize_intensities,
    secret_key_rate,
)
from .monitor import MonitorParams, MonitorRecordStats, estimate_intensity_intervals
from .overlap import TauTable, tau_table
from .photon import DeviationInterval, IntensityInterval, photon_bounds
from .records import ProtocolParams, enumerate_records
from .solver import HighsSolver, SimplexSolver, solve_lp

__version__ = "0.1.0"

__all__ = [
    "ChannelParams",
    "ConfigError",
    "DeviationInterval",
    "GroundTruthCorrelation",
    "HighsSolver",
    "IntensityInterval",
    "KeyRateResult",
    "LinearProgram",
    "MonitorParams",
    "MonitorRecordStats",
    "ObservedStatistics",
    "ProtocolParams",
    "RunConfig",
    "Scenario",
    "SimplexSolver",
    "StageError",
    "TauTable",
    "build_error_lp",
    "build_yield_lp",
    "distance_sweep",
    "enumerate_records",
    "estimate_intensity_intervals",
    "evaluate_scenario",
    "g_bounds",
    "linearize_cs",
    "optimize_intensities",
    "parse_config",
    "photon_bounds",
    "secret_key_rate",
    "simulate_monitor_clicks",
    "solve_lp",
    "tau_table",
]
