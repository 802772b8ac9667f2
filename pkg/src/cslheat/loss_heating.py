"""Non-CSL channels: three-body recombination, evaporation, background
collisions and trap-position jitter.

All energy rates are per atom in nK/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import brentq

from .core import HBAR, NK, Species, TrapGeometry
from .errors import ConvergenceError, DomainError
from .special import ZETA3, bose_function, bose_function_inverse
from .thermo import (
    ThermoState,
    condensate_mu,
    density_condensate,
    density_thermal,
    eta_parameter,
    hf_fraction,
    hf_state,
    t_c_ideal,
    thermal_wavelength,
)

EVAP_ALPHA = 1.12

_GL_X, _GL_W = leggauss(64)


@dataclass(frozen=True)
class ChannelRates:
    dN_dt_tbr: float = 0.0
    du_dt_cool: float = 0.0
    du_dt_tbr: float = 0.0
    du_dt_background: float = 0.0
    du_dt_jitter: float = 0.0

    @property
    def total(self) -> float:
        return self.du_dt_cool + self.du_dt_tbr + self.du_dt_background + self.du_dt_jitter


def _gauss(a: float, b: float, panels: int):
    edges = np.linspace(a, b, panels + 1)
    h = np.diff(edges)[:, None]
    x = (edges[:-1, None] + h * (_GL_X[None] + 1) / 2).ravel()
    w = (h * _GL_W[None] / 2).ravel()
    return x, w


def tbr_polynomial(n0, nt):
    """Density polynomial whose volume integral gives the TBR loss per L3."""
    return n0**3 + 9 * n0**2 * nt + 18 * n0 * nt**2 + 6 * nt**3


def _radial_integral(fn, r_split: float, r_scale: float, tol: float = 1e-10):
    # composite 64-point Gauss rule on each side of r_split; the
    # substitution r = r_split -+ L u^2 removes the square-root kink of the
    # densities at the condensate edge. Panels double until two successive
    # estimates agree.
    r_out = r_split + 12 * r_scale
    panels, prev = 1, None
    for _ in range(10):
        u, w = _gauss(0.0, 1.0, panels)
        total = 0.0
        if r_split > 0:
            r = r_split * (1 - u**2)
            total += np.sum(w * 2 * r_split * u * 4 * np.pi * r**2 * fn(r))
        span = r_out - r_split
        r = r_split + span * u**2
        total += np.sum(w * 2 * span * u * 4 * np.pi * r**2 * fn(r))
        if prev is not None and abs(total - prev) <= tol * abs(total):
            return total
        prev, panels = total, panels * 2
    raise ConvergenceError("radial quadrature did not converge", achieved=abs(total - prev) / abs(total))


def tbr_density_integral(state: ThermoState, mu_source: str = "fraction") -> float:
    """Volume integral (1/m^6) of the TBR density polynomial for a condensed state."""
    m, w = state.species.mass, state.trap.omega_bar
    mu = condensate_mu(state, mu_source)
    r_tf = math.sqrt(2 * max(mu, 0.0) * NK / (m * w**2))
    r_th = math.sqrt(2 * state.temperature * NK / (m * w**2))

    def integrand(r):
        return tbr_polynomial(density_condensate(r, state, mu_source), density_thermal(r, state, mu_source))

    return _radial_integral(integrand, r_tf, r_th)


def thermal_gas_tbr_integral(n: float, temperature: float, trap: TrapGeometry, species: Species | None = None) -> float:
    """Same integral for a gas with no condensate (ideal Bose gas, 6 n_T^3)."""
    species = species or trap.species
    s = temperature / t_c_ideal(n, trap)
    # fugacity from N = (kT/hbar w)^3 g_3(z); saturates at z = 1 below T_c
    z0 = bose_function_inverse(3.0, min(ZETA3 / s**3, ZETA3)) if s > 0 else 1.0
    m, w = species.mass, trap.omega_bar
    lam3 = thermal_wavelength(temperature, species) ** 3
    r_th = math.sqrt(2 * temperature * NK / (m * w**2))

    def integrand(r):
        v = 0.5 * m * w**2 * r**2 / NK
        nt = bose_function(1.5, z0 * np.exp(-v / temperature)) / lam3
        return 6 * nt**3

    return _radial_integral(integrand, 0.0, r_th)


def n_at_critical(temperature: float, trap: TrapGeometry) -> float:
    """Atom number whose ideal-gas T_c equals ``temperature``."""
    return ZETA3 * (temperature / trap.hbar_omega) ** 3


def _hf_onset_number(temperature: float, trap: TrapGeometry, species: Species) -> float:
    """Atom number at which the Hartree-Fock fraction turns positive at fixed T."""
    def frac(ln_n):
        n = math.exp(ln_n)
        return float(hf_fraction(temperature / t_c_ideal(n, trap), eta_parameter(n, trap, species)))

    # f = 0 exactly at T_c; the root wanted is the one above it
    lo = math.log(n_at_critical(temperature, trap)) + 1e-10
    hi = lo + 0.1
    while frac(hi) <= 0:
        hi += 0.1
    return math.exp(brentq(frac, lo, hi, xtol=1e-12))


def tbr_rate_per_k3(n: float, temperature: float, trap: TrapGeometry, species: Species | None = None, mu_source: str = "fraction") -> float:
    """-dN/dt divided by K3 (1/m^6 units times 3), for N atoms at fixed T.

    Above T_c the gas is purely thermal. Just below T_c the Hartree-Fock
    fraction is still negative; there the rate is interpolated in log-log
    between its values at T_c and at the onset of a positive fraction.
    """
    species = species or trap.species
    if n <= 0:
        return 0.0
    tc = t_c_ideal(n, trap)
    s = temperature / tc
    if s >= 1:
        return 3 * thermal_gas_tbr_integral(n, temperature, trap, species)
    eta = eta_parameter(n, trap, species)
    if float(hf_fraction(s, eta)) > 0:
        state = hf_state(n, temperature, trap, species, eta=eta)
        return 3 * tbr_density_integral(state, mu_source)
    n_c = n_at_critical(temperature, trap)
    n_on = _hf_onset_number(temperature, trap, species) * (1 + 1e-9)
    r_c = 3 * thermal_gas_tbr_integral(n_c, temperature, trap, species)
    r_on = 3 * tbr_density_integral(hf_state(n_on, temperature, trap, species), mu_source)
    x = math.log(n / n_c) / math.log(n_on / n_c)
    return math.exp((1 - x) * math.log(r_c) + x * math.log(r_on))


def tbr_loss_rate(state: ThermoState, k3c: float, mu_source: str = "fraction") -> float:
    """dN/dt (atoms/s, negative) from three-body recombination, L3 = 3 K3."""
    if k3c < 0:
        raise DomainError("K3 must be >= 0")
    if k3c == 0:
        return 0.0
    return -3 * k3c * tbr_density_integral(state, mu_source)


def evap_cooling_rate(trap: TrapGeometry, tau_cool: float, alpha: float = EVAP_ALPHA) -> float:
    if not tau_cool > 0:
        raise DomainError("tau_cool must be positive")
    if not trap.e_b_valid:
        raise DomainError("trap depth does not exceed the zero-point energy")
    return -alpha * trap.e_b / tau_cool


def condensate_energy_per_atom(state: ThermoState) -> float:
    """U(T=0)/N = (5/7) eta T_c in nK."""
    return 5 / 7 * state.eta * state.t_c


def tbr_heating_rate(state: ThermoState, tau_n: float) -> float:
    """Heating left behind when TBR removes atoms of condensate-like energy."""
    if not tau_n > 0:
        raise DomainError("tau_N must be positive")
    return (state.u_per_n - condensate_energy_per_atom(state)) / tau_n


def background_energy_rate(state: ThermoState, tau_1: float) -> float:
    if not tau_1 > 0:
        raise DomainError("tau_1 must be positive")
    return -state.u_per_n / tau_1


def laser_jitter_rate(omega_tr: float, s_psd: float, species: Species) -> float:
    """Position-noise heating (pi/2) m w^4 S(w) per axis, in nK/s.

    ``s_psd`` is the one-sided position PSD in m^2/Hz; it is converted to
    the per-(rad/s) density the formula is written for.
    """
    if s_psd < 0:
        raise DomainError("PSD must be >= 0")
    s_omega = s_psd / (2 * math.pi)
    return math.pi / 2 * species.mass * omega_tr**4 * s_omega / NK


def trap_jitter_rate(trap: TrapGeometry, s_psd: float) -> float:
    """Jitter heating summed over the three trap axes."""
    return sum(laser_jitter_rate(2 * math.pi * f, s_psd, trap.species) for f in trap.frequencies)


def tf_cubic_integral(mu: float, trap: TrapGeometry, species: Species | None = None) -> float:
    """Closed-form integral of n0^3 over a Thomas-Fermi profile (1/m^6)."""
    species = species or trap.species
    g = 4 * math.pi * HBAR**2 * species.scattering_length / species.mass
    r_tf = math.sqrt(2 * mu * NK / (species.mass * trap.omega_bar**2))
    return 4 * math.pi * r_tf**3 * (mu * NK / g) ** 3 * 16 / 315
