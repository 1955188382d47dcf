"""Simulator and verification suite for continuous-variable mean king retrodiction."""

from .errors import (ConfigurationError, DegeneratePostselectionError, DivergentIntegralError,
                     DomainError, MeanKingError)
from .oracle import GaussianDistribution, GaussianExponent, PointerConfig, Regularization
from .phase_space import (CommutatorMatrix, PhasePoint, ProtocolSelection, QuadraturePrediction,
                          commutator_matrix, derive_phase_points, gamma_phase, predict_quadratures)

__all__ = [
    "ConfigurationError", "DegeneratePostselectionError", "DivergentIntegralError", "DomainError",
    "MeanKingError", "GaussianDistribution", "GaussianExponent", "PointerConfig", "Regularization",
    "CommutatorMatrix", "PhasePoint", "ProtocolSelection", "QuadraturePrediction",
    "commutator_matrix", "derive_phase_points", "gamma_phase", "predict_quadratures",
]
