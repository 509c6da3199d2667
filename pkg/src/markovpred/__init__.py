"""Prediction of Markov chain trajectories: estimators, KL risk, lower-bound constructions."""

__version__ = "0.1.0"

from .chains import (
    OrderMTransition,
    TransitionMatrix,
    Trajectory,
    pseudo_spectral_gap,
    random_chain,
    simulate,
    simulate_batch,
    spectral_report,
    stationary_distribution,
    transition_counts,
)
from .errors import MarkovPredictionError
from .estimators import AddC, Cesaro, Hybrid, TrueRow, parse_predictor
from .risk import exact_redundancy, exact_risk, kl, mc_risk, pointwise_redundancy_audit

__all__ = [
    "AddC",
    "Cesaro",
    "Hybrid",
    "MarkovPredictionError",
    "OrderMTransition",
    "Trajectory",
    "TransitionMatrix",
    "TrueRow",
    "exact_redundancy",
    "exact_risk",
    "kl",
    "mc_risk",
    "parse_predictor",
    "pointwise_redundancy_audit",
    "pseudo_spectral_gap",
    "random_chain",
    "simulate",
    "simulate_batch",
    "spectral_report",
    "stationary_distribution",
    "transition_counts",
]
