"""Heating of trapped Bose gases by continuous spontaneous localization.

Simulation of the CSL rate equations, Hartree-Fock thermodynamics, loss
and heating channels, decay fits, and the energy audit that bounds the
collapse rate lambda.
"""

__version__ = "0.1.0"

from .core import CS133, RB87, CslParams, Species, TrapGeometry, preset_trap, t_csl_of, trap_derived  # noqa: E402
from .errors import ConfigError, ConvergenceError, CutoffLeakageError, DataError, DomainError  # noqa: E402

__all__ = [
    "__version__",
    "CS133",
    "RB87",
    "CslParams",
    "Species",
    "TrapGeometry",
    "preset_trap",
    "t_csl_of",
    "trap_derived",
    "ConfigError",
    "ConvergenceError",
    "CutoffLeakageError",
    "DataError",
    "DomainError",
]
