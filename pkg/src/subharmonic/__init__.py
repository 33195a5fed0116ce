"""Subharmonic periodic orbits of perturbed integrable systems via Melnikov vectors."""

__version__ = "0.1.0"

from .errors import (ConvergenceError, DomainError, IntegrationError, NumericalError,
                     QuadratureError, SingularJacobianError)
from .elliptic import complete_K, jacobi_sn_cn_dn
from .systems import (ActionAnglePoint, CoupledOscillator, GeneralizedEuler, LinearOscillator,
                      ResonanceSpec, SystemModel, build_system, resonance_check)
from .melnikov import MelnikovResult, existence_report, find_zero, melnikov_vector
from .orbit import PeriodicOrbitRecord, refine_periodic_orbit, verify_orbit
from .floquet import StabilityReport, characteristic_multipliers, classify

__all__ = [
    "__version__",
    "ActionAnglePoint", "ResonanceSpec", "SystemModel",
    "LinearOscillator", "GeneralizedEuler", "CoupledOscillator", "build_system",
    "resonance_check", "complete_K", "jacobi_sn_cn_dn",
    "MelnikovResult", "melnikov_vector", "find_zero", "existence_report",
    "PeriodicOrbitRecord", "refine_periodic_orbit", "verify_orbit",
    "StabilityReport", "characteristic_multipliers", "classify",
    "NumericalError", "DomainError", "IntegrationError", "QuadratureError",
    "ConvergenceError", "SingularJacobianError",
]
