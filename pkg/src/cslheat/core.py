"""Physical constants, unit conventions and shared parameter types.

Conventions used everywhere in the package:

* time in seconds, lengths in metres;
* energies expressed as temperatures E/k_B in nanokelvin (nK);
* rates in 1/s;
* trap frequencies ``f*`` are linear (Hz), ``omega*`` are angular (rad/s).

Conversion to Joules only happens inside functions that need SI
intermediate quantities, via :data:`NK`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy import constants as _sc

from .errors import DomainError

HBAR = _sc.hbar  # J s
KB = _sc.k  # J/K
AMU = _sc.atomic_mass  # kg
A0 = _sc.physical_constants["Bohr radius"][0]  # m
NUCLEON_MASS = 0.5 * (_sc.m_p + _sc.m_n)  # kg
NK = 1e-9 * KB  # Joules per nanokelvin


@dataclass(frozen=True)
class Species:
    """An atomic species: nucleon count, mass (kg), s-wave scattering length (m)."""

    name: str
    mass_number: int
    mass: float
    scattering_length: float

    def __post_init__(self):
        if self.mass_number < 1:
            raise DomainError("mass_number must be >= 1")
        if self.mass <= 0:
            raise DomainError("mass must be positive")
        expected = self.mass_number * NUCLEON_MASS
        if abs(self.mass / expected - 1) > 0.01:
            raise DomainError(
                f"mass {self.mass:.4e} kg inconsistent with A={self.mass_number} "
                f"(expected about {expected:.4e} kg)"
            )

    def with_scattering_length(self, a_s: float) -> "Species":
        return Species(self.name, self.mass_number, self.mass, a_s)


CS133 = Species("Cs-133", 133, 132.905451933 * AMU, 232 * A0)
RB87 = Species("Rb-87", 87, 86.909180520 * AMU, 100.4 * A0)

SPECIES = {"Cs-133": CS133, "Cs": CS133, "cs133": CS133, "Rb-87": RB87, "Rb": RB87, "rb87": RB87}


def species_by_name(name: str) -> Species:
    try:
        return SPECIES[name]
    except KeyError:
        raise DomainError(f"unknown species {name!r}; known: Cs-133, Rb-87") from None


def t_csl_of(species: Species, a_csl: float) -> float:
    """CSL temperature hbar^2 / (m a^2 k_B) in nK."""
    if not a_csl > 0:
        raise DomainError("a_csl must be positive")
    return HBAR**2 / (species.mass * a_csl**2 * NK)


@dataclass(frozen=True)
class CslParams:
    """Collapse rate ``lam`` (1/s) and localization length ``a_csl`` (m)."""

    lam: float
    a_csl: float = 1e-7

    def __post_init__(self):
        if self.lam < 0:
            raise DomainError("lambda must be >= 0")
        if not self.a_csl > 0:
            raise DomainError("a_csl must be positive")

    def t_csl(self, species: Species) -> float:
        return t_csl_of(species, self.a_csl)

    def rate_A2(self, species: Species) -> float:
        """Effective per-atom collapse rate lambda*A^2 (1/s)."""
        return self.lam * species.mass_number**2


@dataclass(frozen=True)
class TrapGeometry:
    """Harmonic trap with depth; derived quantities are properties.

    ``e_b`` is the escape energy (depth minus zero-point energy).
    """

    f1: float
    f2: float
    f3: float
    depth: float
    species: Species = field(default=CS133)

    def __post_init__(self):
        if min(self.f1, self.f2, self.f3) <= 0:
            raise DomainError("trap frequencies must be positive")

    @property
    def frequencies(self) -> tuple[float, float, float]:
        return (self.f1, self.f2, self.f3)

    @property
    def omega_bar(self) -> float:
        """Geometric-mean angular frequency (rad/s)."""
        return 2 * math.pi * (self.f1 * self.f2 * self.f3) ** (1 / 3)

    @property
    def a_ho(self) -> float:
        """Oscillator length sqrt(hbar / m omega_bar) in m."""
        return math.sqrt(HBAR / (self.species.mass * self.omega_bar))

    @property
    def hbar_omega(self) -> float:
        """hbar * omega_bar in nK."""
        return HBAR * self.omega_bar / NK

    @property
    def zero_point(self) -> float:
        """Zero-point energy (hbar/2)(w1+w2+w3) in nK."""
        return 0.5 * HBAR * 2 * math.pi * (self.f1 + self.f2 + self.f3) / NK

    @property
    def e_b(self) -> float:
        return self.depth - self.zero_point

    @property
    def e_b_valid(self) -> bool:
        return self.e_b > 0


def trap_derived(f1: float, f2: float, f3: float, depth: float, species: Species = CS133) -> TrapGeometry:
    return TrapGeometry(f1, f2, f3, depth, species)


# Four cesium traps: frequencies (Hz), depth (nK), scattering length (Bohr radii).
TRAP_PRESETS = {
    "1": ((20.5, 22.0, 30.0), 158.0, 232.0),
    "2": ((14.3, 15.5, 21.1), 79.0, 232.0),
    "3": ((22.0, 23.5, 32.0), 158.0, 250.0),
    "4": ((15.5, 16.4, 22.6), 79.0, 250.0),
}


def preset_trap(name: str) -> TrapGeometry:
    """One of the four cesium traps, by name ``"1"`` .. ``"4"`` (``"trap1"`` also accepted)."""
    key = name.lower().removeprefix("trap").strip()
    if key not in TRAP_PRESETS:
        raise DomainError(f"unknown trap preset {name!r}")
    freqs, depth, a_s = TRAP_PRESETS[key]
    return TrapGeometry(*freqs, depth, CS133.with_scattering_length(a_s * A0))
