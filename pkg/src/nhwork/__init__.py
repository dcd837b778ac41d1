"""Work statistics for non-Hermitian evolutions with Hermitian endpoints.

The package computes purified two-point-measurement work statistics for a
driven non-Hermitian Su-Schrieffer-Heeger chain and checks them against
brute-force system-bath and unitary-dilation simulations.
"""

from nhwork.errors import ExtinctionError, NumericalError, ValidationError
from nhwork.model import DriveProfile, LatticeSpec
from nhwork.evolve import ScaledPropagator, propagate
from nhwork.workstats import (
    TransitionTable,
    WorkDistribution,
    characteristic_function,
    moments,
    purified_transition_table,
    work_distribution,
)

__version__ = "0.1.0"

__all__ = [
    "DriveProfile",
    "ExtinctionError",
    "LatticeSpec",
    "NumericalError",
    "ScaledPropagator",
    "TransitionTable",
    "ValidationError",
    "WorkDistribution",
    "characteristic_function",
    "moments",
    "propagate",
    "purified_transition_table",
    "work_distribution",
]
