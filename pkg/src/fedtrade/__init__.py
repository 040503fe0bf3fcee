"""Accuracy-privacy trade-off analysis for collaborative learning protocols.

Closed-form evaluations, participation-feasibility solvers, symmetric
optima, protocol simulators that validate every formula, and the
personalized-versus-symmetric experiment harness.
"""

from .allocation import NoiseAllocation
from .core import (
    ClientPreference,
    ContractViolation,
    EvalPair,
    GammaSearchResult,
    GeneralEvaluation,
    ParticipationReport,
    SymmetricOptimum,
    check_participation,
    find_symmetric_beneficial,
    utility_lp,
)

__all__ = [
    "ClientPreference",
    "ContractViolation",
    "EvalPair",
    "GammaSearchResult",
    "GeneralEvaluation",
    "NoiseAllocation",
    "ParticipationReport",
    "SymmetricOptimum",
    "check_participation",
    "find_symmetric_beneficial",
    "utility_lp",
]

__version__ = "0.1.0"
