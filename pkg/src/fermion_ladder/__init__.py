"""Monitored free-fermion ladder simulator."""
from .errors import (
    ConfigError, DegenerateOutcomeError, FitError, LadderError, NumericError, ParameterError,
)
from .lattice import LadderParams, build_single_particle_hamiltonian, propagator
from .trajectory import RunConfig

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DegenerateOutcomeError", "FitError", "LadderError", "NumericError",
    "ParameterError", "LadderParams", "RunConfig", "build_single_particle_hamiltonian",
    "propagator", "__version__",
]
