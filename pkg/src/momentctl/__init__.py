"""Moment-method toolkit for null controllability of tensorized parabolic systems.

Modules
-------
spectral1d   1-D and transverse spectra, Sturm-Liouville solver
classes      class verification, grouping, tensorized mode sets
gram         divided differences, group Gram matrices, closed-form kernels
biortho      biorthogonal families, block moments, weighted inequality checks
systems      the controlled systems (Dolecki, boundary, internal, heat)
control      minimal-time surrogates, control synthesis, heat cost sweep
sim          exact spectral forward simulation
cli          configuration-driven runner
"""

__version__ = "0.1.0"

from .errors import (ApproximateControllabilityError, ConditioningError, ContractError,
                     MomentError, NumericError)
from .kernels import BACKEND

__all__ = ["__version__", "BACKEND", "MomentError", "ContractError", "NumericError",
           "ConditioningError", "ApproximateControllabilityError"]
