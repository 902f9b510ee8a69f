"""Estimate Bell-diagonal states from the success statistics of entanglement distillation."""

from .bellvec import NoiseModel, PartyNoise, werner_vector
from .estimator import (
    EstimateReport,
    bisection_search,
    estimate_bell,
    estimate_werner,
    werner_sample_bound,
)
from .experiment import ExperimentConfig, ExperimentLog, run_experiment
from .protocols import ProtocolId

__all__ = [
    "EstimateReport",
    "ExperimentConfig",
    "ExperimentLog",
    "NoiseModel",
    "PartyNoise",
    "ProtocolId",
    "bisection_search",
    "estimate_bell",
    "estimate_werner",
    "run_experiment",
    "werner_sample_bound",
    "werner_vector",
]
