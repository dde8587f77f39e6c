"""Parallel SIR particle filter for bearings-only source localization.

A bit-level model of a K-way parallel sampling/importance/resampling filter
with ring particle routing, a fixed-point datapath, a cycle-cost model and a
closed-loop simulation harness.
"""
from .filterbank import ParallelSIRFilter, mean_estimate, route_ring, sector_check, standard_sir
from .harness import ScenarioConfig, estimation_error, monte_carlo, run_many, run_scenario
from .resample import ResampleOutcome, replication_counts, systematic_resample
from .rng import Lfsr, LfsrState, lfsr_next_block
from .timing import ConfigurationError, CycleBudget, sampling_rate, sir_cycles

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "CycleBudget", "Lfsr", "LfsrState", "ParallelSIRFilter",
    "ResampleOutcome", "ScenarioConfig", "estimation_error", "lfsr_next_block", "mean_estimate",
    "monte_carlo", "replication_counts", "route_ring", "run_many", "run_scenario",
    "sampling_rate", "sector_check", "sir_cycles", "standard_sir", "systematic_resample",
]
