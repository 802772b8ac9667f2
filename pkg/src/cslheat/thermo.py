"""Thermodynamics of a harmonically trapped Bose gas.

Ideal-gas results plus the finite-temperature Hartree-Fock corrections
(Thomas-Fermi condensate) controlled by the interaction parameter eta.
Temperatures and energies are in nK; U is reported per atom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .core import HBAR, NK, Species, TrapGeometry
from .errors import DomainError
from .special import ZETA2, ZETA3, ZETA4, bose_function, zeta_constants

__all__ = [
    "ThermoState",
    "ThermoDerivatives",
    "zeta_constants",
    "t_c_ideal",
    "eta_parameter",
    "ideal_fractions",
    "ideal_energy_and_heat",
    "lambda_ideal_only_csl",
    "hf_fraction",
    "hf_state",
    "hf_derivatives",
    "temperature_from_fraction",
    "condensate_mu",
    "density_condensate",
    "density_thermal",
]


def t_c_ideal(n: float, trap: TrapGeometry) -> float:
    """Ideal-gas critical temperature hbar*omega_bar*(N/zeta(3))^(1/3) in nK."""
    if n <= 0:
        raise DomainError("atom number must be positive")
    return trap.hbar_omega * (n / ZETA3) ** (1 / 3)


def eta_parameter(n: float, trap: TrapGeometry, species: Species | None = None) -> float:
    species = species or trap.species
    a_ho = math.sqrt(HBAR / (species.mass * trap.omega_bar))
    tc = t_c_ideal(n, trap)
    return trap.hbar_omega / (2 * tc) * (15 * n * species.scattering_length / a_ho) ** 0.4


def ideal_fractions(n: float, temperature: float, trap: TrapGeometry) -> dict:
    s = temperature / t_c_ideal(n, trap)
    cloud = n * min(s, 1.0) ** 3
    return {"N_cloud": cloud, "N_BEC": n - cloud, "f": 1 - cloud / n}


def ideal_energy_and_heat(n: float, temperature: float, trap: TrapGeometry) -> dict:
    """Cloud energy (nK, total) and specific heat per atom (units of k_B), below T_c."""
    tc = t_c_ideal(n, trap)
    s = temperature / tc
    if s > 1:
        raise DomainError("ideal condensate formulas need T <= T_c")
    return {
        "U_cloud": n * 3 * tc * s**4 * ZETA4 / ZETA3,
        "C": 12 * s**3 * ZETA4 / ZETA3,
    }


def lambda_ideal_only_csl(temperature: float, t_c: float, tau_f: float, csl, species: Species) -> float:
    """Collapse rate implied by a condensate-fraction lifetime if CSL were the only heating.

    Ideal gas, no atom loss; ``csl`` supplies the localization length.
    """
    if math.isinf(tau_f):
        return 0.0
    return (
        (1 / (species.mass_number**2 * tau_f))
        * (temperature / csl.t_csl(species))
        * (1 - (temperature / t_c) ** 3)
        * 16 * ZETA4 / (3 * ZETA3)
    )


def hf_fraction(s, eta):
    """Hartree-Fock condensate fraction as a function of s = T/T_c."""
    s = np.asarray(s, dtype=float)
    d = np.clip(1 - s**3, 0.0, None)
    return 1 - s**3 - ZETA2 / ZETA3 * eta * s**2 * d**0.4


@dataclass(frozen=True)
class ThermoState:
    """Equilibrium state of N atoms at a temperature in a given trap."""

    n: float
    temperature: float
    trap: TrapGeometry
    species: Species
    t_c: float
    s: float
    eta: float
    mu: float
    f: float
    u_per_n: float


@dataclass(frozen=True)
class ThermoDerivatives:
    c: float
    mu_n: float
    f_t: float
    f_n: float


def hf_state(n: float, temperature: float, trap: TrapGeometry, species: Species | None = None, eta: float | None = None) -> ThermoState:
    """Hartree-Fock state for 0 < T < T_c.

    ``eta`` may be forced (e.g. 0 for the ideal gas); by default it is
    computed from N, the trap and the scattering length.
    """
    species = species or trap.species
    tc = t_c_ideal(n, trap)
    s = temperature / tc
    if not 0 <= s < 1:
        raise DomainError(f"T/T_c = {s:.4f} outside the condensed regime [0, 1)")
    if eta is None:
        eta = eta_parameter(n, trap, species)
    d = 1 - s**3
    mu = tc * eta * d**0.4
    f = float(hf_fraction(s, eta))
    if f < 0:
        raise DomainError(f"T/T_c = {s:.4f} is past the point where the Hartree-Fock fraction vanishes")
    u = tc * (3 * ZETA4 / ZETA3 * s**4 + eta / 7 * d**0.4 * (5 + 16 * s**3))
    return ThermoState(n, temperature, trap, species, tc, s, eta, mu, f, u)


def hf_derivatives(state: ThermoState) -> ThermoDerivatives:
    s, eta, tc, T = state.s, state.eta, state.t_c, state.temperature
    d = 1 - s**3
    c = 12 * s**3 * ZETA4 / ZETA3 + 6 * s**2 * eta / d**0.6 * (1 - 56 * s**3 / 35)
    mu_n = tc * eta / (5 * d**0.6) * (5 + s**3)
    if T > 0:
        f_t = -3 * s**3 / T - 2 * eta * ZETA2 * s**2 / (5 * T * ZETA3 * d**0.6) * (5 - 8 * s**3)
    else:
        f_t = 0.0
    f_n = s**3 + eta * ZETA2 * s**2 / (15 * ZETA3 * d**0.6) * (9 - 15 * s**3)
    return ThermoDerivatives(c, mu_n, f_t, f_n)


def temperature_from_fraction(f_target: float, n: float, trap: TrapGeometry, species: Species | None = None, eta: float | None = None) -> float:
    """Invert the Hartree-Fock fraction for the temperature (nK)."""
    if not 0 < f_target < 1:
        raise DomainError("condensate fraction must lie in (0, 1)")
    species = species or trap.species
    if eta is None:
        eta = eta_parameter(n, trap, species)
    g = lambda s: float(hf_fraction(s, eta)) - f_target
    # the fraction is monotone on (0, s0) where it first reaches zero
    if g(0.0) <= 0:
        raise DomainError("no temperature reproduces this fraction")
    s_hi = 1.0 - 1e-15
    if g(s_hi) >= 0:
        raise DomainError("no temperature reproduces this fraction")
    s = brentq(g, 0.0, s_hi, xtol=1e-14, rtol=1e-14, maxiter=200)
    return s * t_c_ideal(n, trap)


# --- spatial densities (isotropic-equivalent trap at omega_bar) ---


def _g_coupling(species: Species) -> float:
    return 4 * math.pi * HBAR**2 * species.scattering_length / species.mass


def condensate_mu(state: ThermoState, source: str = "fraction") -> float:
    """Chemical potential (nK) used for the Thomas-Fermi condensate profile.

    ``source="fraction"`` normalises the profile to the condensate atom
    number f*N; ``source="hf"`` uses the Hartree-Fock expression, which
    normalises to N(1 - s^3) atoms instead.
    """
    if source == "hf":
        return state.mu
    if source != "fraction":
        raise ValueError("source must be 'fraction' or 'hf'")
    n0 = max(state.f, 0.0) * state.n
    a_ho = math.sqrt(HBAR / (state.species.mass * state.trap.omega_bar))
    return 0.5 * state.trap.hbar_omega * (15 * n0 * state.species.scattering_length / a_ho) ** 0.4


def _potential_nk(r, state: ThermoState):
    m = state.species.mass
    return 0.5 * m * state.trap.omega_bar**2 * np.asarray(r, dtype=float) ** 2 / NK


def density_condensate(r, state: ThermoState, mu_source: str = "fraction"):
    """Thomas-Fermi condensate density (1/m^3) at radius r (m)."""
    mu = condensate_mu(state, mu_source)
    diff = np.clip(mu - _potential_nk(r, state), 0.0, None)
    return diff * NK / _g_coupling(state.species)


def thermal_wavelength(temperature: float, species: Species) -> float:
    return HBAR * math.sqrt(2 * math.pi / (species.mass * temperature * NK))


def density_thermal(r, state: ThermoState, mu_source: str = "fraction", return_flag: bool = False):
    """Hartree-Fock thermal density (1/m^3), no feedback onto the condensate.

    Fugacities above 1 (possible only through a non-self-consistent mu)
    are clamped; ``return_flag`` also returns whether clamping happened.
    """
    mu = condensate_mu(state, mu_source)
    v = _potential_nk(r, state)
    n0 = density_condensate(r, state, mu_source)
    mean_field = 2 * _g_coupling(state.species) * n0 / NK
    arg = -(v + mean_field - mu) / state.temperature
    clamped = bool(np.any(arg > 0))
    z = np.exp(np.minimum(arg, 0.0))
    out = bose_function(1.5, z) / thermal_wavelength(state.temperature, state.species) ** 3
    if return_flag:
        return out, clamped
    return out
