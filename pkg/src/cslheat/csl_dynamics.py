"""CSL rate equations for trapped atoms.

Two descriptions of the same dynamics live here:

* discrete populations of box or harmonic-oscillator levels, coupled
  through one-dimensional overlap integrals ``I_nm`` (separable in 3-D);
* the continuum limit, a rate equation for the occupation per unit energy
  ``N_eps`` whose kernel is a Gaussian in sqrt(eps).

In the continuum, with ``z = sqrt(eps)`` and ``N_eps`` continued as an odd
function of ``z``, the collapse term is a Gaussian convolution in ``z`` of
variance ``T_CSL/4``. That gives the closed series solution (a Poisson
mixture of convolution powers) implemented by :func:`evolve_series`, which
:func:`evolve_ode` cross-checks by direct time integration.

Energies are in nK, times in s, rates in 1/s.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import solve_ivp
from scipy.special import gammaln

from .core import CslParams, Species
from .errors import ConvergenceError, CutoffLeakageError, DomainError
from .special import ZETA3, bose_function_inverse

BOX_C = 1.5**3
HARMONIC_C = (2 * math.pi) ** -1.5
# value quoted for the Thomas-Fermi ground state; see tf_shape_constant()
TF_C_QUOTED = 1.7

SERIES_S_MAX = 200


# ---------------------------------------------------------------------------
# level bases and 1-D couplings


@dataclass(frozen=True)
class LevelBasis:
    """Single-particle basis for the discrete rate equations.

    ``alpha`` is ``a/sigma`` for the harmonic oscillator (sigma the
    oscillator length) and ``pi*a/sigma`` for a box of side sigma.
    """

    potential_kind: str
    alpha: float
    sigma: float | None = None

    def __post_init__(self):
        if self.potential_kind not in ("box", "harmonic"):
            raise DomainError("potential_kind must be 'box' or 'harmonic'")
        if not self.alpha > 0:
            raise DomainError("alpha must be positive")
        if self.sigma is not None and not self.sigma > 0:
            raise DomainError("sigma must be positive")
        if self.alpha > 0.3:
            warnings.warn(f"alpha={self.alpha} is not small; closed-form couplings are unreliable", stacklevel=2)

    @classmethod
    def from_lengths(cls, potential_kind: str, sigma: float, a_csl: float) -> "LevelBasis":
        ratio = a_csl / sigma
        alpha = math.pi * ratio if potential_kind == "box" else ratio
        return cls(potential_kind, alpha, sigma)

    @property
    def first_level(self) -> int:
        return 1 if self.potential_kind == "box" else 0


def _closed_form(n, m, basis: LevelBasis):
    n = np.asarray(n, dtype=float)
    m = np.asarray(m, dtype=float)
    a = basis.alpha
    if basis.potential_kind == "box":
        return a / math.sqrt(math.pi) * (np.exp(-((n - m) ** 2) * a * a) + np.exp(-((n + m) ** 2) * a * a))
    rn, rm = np.sqrt(n), np.sqrt(m)
    return a / np.sqrt(2 * math.pi * n) * (np.exp(-2 * a * a * (rn - rm) ** 2) + np.exp(-2 * a * a * (rn + rm) ** 2))


def coupling_closed_form(n: int, m: int, basis: LevelBasis) -> float:
    """Small-alpha approximation to the 1-D overlap integral I_nm."""
    if n < 1 or m < 1:
        raise DomainError("closed-form couplings need n, m >= 1")
    return float(_closed_form(n, m, basis))


def hermite_functions(n_max: int, x):
    """Normalised oscillator eigenfunctions psi_0..psi_n_max at x (rows)."""
    x = np.asarray(x, dtype=float)
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = math.pi**-0.25 * np.exp(-(x**2) / 2)
    if n_max >= 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for k in range(1, n_max):
        out[k + 1] = math.sqrt(2.0 / (k + 1)) * x * out[k] - math.sqrt(k / (k + 1)) * out[k - 1]
    return out


_GL16 = leggauss(16)


def _panel_nodes(a: float, b: float, panels: int):
    x0, w0 = _GL16
    edges = np.linspace(a, b, panels + 1)
    h = np.diff(edges)[:, None]
    x = (edges[:-1, None] + h * (x0[None] + 1) / 2).ravel()
    w = (h * w0[None] / 2).ravel()
    return x, w


def _gaussian_form(p, x, width: float, block: int = 1024):
    # sum_ij p_i p_j exp(-(x_i - x_j)^2 / (4 width^2)); nodes are sorted so
    # only a band around the diagonal contributes
    total = 0.0
    reach = 13.0 * width
    for start in range(0, len(x), block):
        xi = x[start : start + block]
        lo = np.searchsorted(x, xi[0] - reach)
        hi = np.searchsorted(x, xi[-1] + reach)
        d = xi[:, None] - x[None, lo:hi]
        total += p[start : start + block] @ (np.exp(-d * d / (4 * width * width)) @ p[lo:hi])
    return total


def coupling_numeric_1d(n: int, m: int, basis: LevelBasis, rtol: float = 1e-9, atol: float = 1e-13, max_doublings: int = 8) -> float:
    """I_nm by 2-D product Gauss-Legendre quadrature of the exact integrand.

    The panel count doubles until two successive estimates agree to
    ``rtol`` (or ``atol``, since I_nm <= 1); failure raises :class:`ConvergenceError` with the achieved
    relative change.
    """
    lo = basis.first_level
    if n < lo or m < lo:
        raise DomainError(f"levels start at {lo} for a {basis.potential_kind} basis")
    a = basis.alpha
    top = max(n, m)
    if basis.potential_kind == "box":
        # x in [0, pi]; Gaussian width alpha' in these units
        start, stop = 0.0, math.pi
        resolution = min(a, math.pi / (2 * top))

        def product(x):
            return (2 / math.pi) * np.sin(n * x) * np.sin(m * x)

    else:
        half = math.sqrt(2 * top + 1) + 9.0
        start, stop = -half, half
        resolution = min(a, 1.0 / math.sqrt(2 * top + 1))

        def product(x):
            h = hermite_functions(top, x)
            return h[n] * h[m]

    panels = max(4, int(math.ceil((stop - start) / (4 * resolution))))
    prev = None
    for _ in range(max_doublings):
        x, w = _panel_nodes(start, stop, panels)
        value = _gaussian_form(product(x) * w, x, a)
        if prev is not None and abs(value - prev) <= rtol * abs(value) + atol:
            return float(value)
        prev, panels = value, panels * 2
    raise ConvergenceError("coupling quadrature did not converge", achieved=abs(value - prev) / abs(value), best=value)


def tf_shape_constant() -> float:
    """sigma^3 * integral of phi0^4 for the Thomas-Fermi ground state.

    phi0^2 = sigma^-3 [(15/8pi)^(2/5) - y^2/sigma^2] inside its radius; the
    radial integral is evaluated by Gauss-Legendre quadrature.
    """
    c = (15 / (8 * math.pi)) ** 0.4
    x, w = leggauss(32)
    r = math.sqrt(c) * (x + 1) / 2
    wr = w * math.sqrt(c) / 2
    return float(np.sum(wr * 4 * math.pi * r**2 * (c - r**2) ** 2))


# ---------------------------------------------------------------------------
# discrete populations


@dataclass(frozen=True)
class DiscreteOccupations:
    """Mean occupations indexed by (n1, n2, n3), levels first_level..n_max."""

    occupations: np.ndarray
    first_level: int = 0
    time: float = 0.0

    def __post_init__(self):
        occ = np.asarray(self.occupations, dtype=float)
        if occ.ndim != 3 or len(set(occ.shape)) != 1:
            raise DomainError("occupations must be a cubic 3-D array")
        object.__setattr__(self, "occupations", occ)

    @property
    def n_max(self) -> int:
        return self.first_level + self.occupations.shape[0] - 1

    @property
    def total(self) -> float:
        return float(self.occupations.sum())

    @classmethod
    def ground_state(cls, n_atoms: float, n_max: int, basis: LevelBasis) -> "DiscreteOccupations":
        size = n_max - basis.first_level + 1
        occ = np.zeros((size, size, size))
        occ[0, 0, 0] = n_atoms
        return cls(occ, basis.first_level)

    def by_total_level(self) -> np.ndarray:
        """Occupation summed over states with equal n1+n2+n3 (index offset removed)."""
        size = self.occupations.shape[0]
        idx = np.add.outer(np.add.outer(np.arange(size), np.arange(size)), np.arange(size))
        return np.bincount(idx.ravel(), weights=self.occupations.ravel())


def coupling_matrix(basis: LevelBasis, n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form 1-D coupling matrix C[n, m] for levels first_level..n_max.

    Each column is divided by its sum over the complete (untruncated)
    basis, so that columns sum to one up to what leaks past ``n_max``.
    Harmonic levels enter the closed form as n + 1/2, which keeps the
    ground state finite. Returns (C, leak) with leak[m] the column mass
    beyond the cutoff.
    """
    first = basis.first_level
    levels = np.arange(first, n_max + 1, dtype=float)
    a = basis.alpha
    shift = 0.5 if basis.potential_kind == "harmonic" else 0.0
    if basis.potential_kind == "box":
        n_big = int(n_max + 12 / a) + 2
    else:
        n_big = int((math.sqrt(n_max + 1) + 7 / a) ** 2) + 2
    full = np.arange(first, n_big + 1, dtype=float)
    raw = _closed_form(full[:, None] + shift, levels[None, :] + shift, basis)
    norm = raw.sum(axis=0)
    c = raw[: len(levels)] / norm
    leak = 1.0 - c.sum(axis=0)
    return c, leak


def discrete_generator(basis: LevelBasis, n_max: int, rate_A2: float = 1.0) -> np.ndarray:
    """Dense generator matrix of the 3-D rate equations (small n_max only)."""
    c, _ = coupling_matrix(basis, n_max)
    k = np.kron(np.kron(c, c), c)
    return rate_A2 * (k - np.eye(k.shape[0]))


def _apply_separable(c: np.ndarray, occ: np.ndarray) -> np.ndarray:
    out = np.tensordot(c, occ, axes=(1, 0))
    out = np.tensordot(c, out, axes=(1, 1)).transpose(1, 0, 2)
    out = np.tensordot(c, out, axes=(1, 2)).transpose(1, 2, 0)
    return out


def evolve_discrete(
    occ0: DiscreteOccupations,
    basis: LevelBasis,
    rate_A2: float,
    t: float,
    rtol: float = 1e-10,
    leak_tol: float = 1e-6,
) -> DiscreteOccupations:
    """Integrate dN_i/dt = -L N_i + L sum_k (C x C x C)_ik N_k up to time t.

    Uses an adaptive 8th-order Runge-Kutta scheme. Population lost past the
    level cutoff is monitored; more than ``leak_tol`` of the total raises
    :class:`CutoffLeakageError`.
    """
    if t < 0:
        raise DomainError("t must be >= 0")
    if occ0.first_level != basis.first_level:
        raise DomainError("occupation indexing does not match the basis")
    if t == 0 or rate_A2 == 0:
        return DiscreteOccupations(occ0.occupations.copy(), occ0.first_level, occ0.time + t)
    c, _ = coupling_matrix(basis, occ0.n_max)
    shape = occ0.occupations.shape

    def rhs(_, y):
        occ = y.reshape(shape)
        return (rate_A2 * (_apply_separable(c, occ) - occ)).ravel()

    n_start = occ0.total
    sol = solve_ivp(rhs, (0.0, t), occ0.occupations.ravel(), method="DOP853", rtol=rtol, atol=rtol * max(n_start, 1.0) * 1e-3)
    if not sol.success:
        raise ConvergenceError(f"discrete evolution failed: {sol.message}")
    occ = sol.y[:, -1].reshape(shape)
    lost = n_start - occ.sum()
    if lost > leak_tol * n_start:
        raise CutoffLeakageError(
            f"{lost / n_start:.2e} of the population left the basis by t={t}; increase n_max beyond {occ0.n_max}"
        )
    return DiscreteOccupations(occ, occ0.first_level, occ0.time + t)


# ---------------------------------------------------------------------------
# energy-space description


@dataclass(frozen=True)
class EnergyDistribution:
    """Occupation per unit energy ``values`` (1/nK) on an ascending ``grid`` (nK)."""

    grid: np.ndarray
    values: np.ndarray
    time: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.shape != v.shape:
            raise DomainError("grid and values must be 1-D arrays of equal length")
        if g[0] < 0 or np.any(np.diff(g) <= 0):
            raise DomainError("grid must be ascending with eps >= 0")
        if np.any(v < -1e-12):
            raise DomainError("occupations must be non-negative")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    @property
    def weights(self) -> np.ndarray:
        """Quadrature weights for integrals over eps (trapezoid rule in sqrt(eps))."""
        return 2 * np.sqrt(self.grid) * _trapezoid_weights(np.sqrt(self.grid))

    @property
    def total(self) -> float:
        return float(self.weights @ self.values)

    @property
    def energy(self) -> float:
        """Total energy (nK, summed over atoms)."""
        return float(self.weights @ (self.grid * self.values))

    def per_level(self, level_spacing: float) -> np.ndarray:
        """Mean occupation of a single level, N_eps times the level spacing."""
        return self.values * level_spacing

    def to_rows(self):
        return [(float(e), float(v)) for e, v in zip(self.grid, self.values)]


def _trapezoid_weights(x: np.ndarray) -> np.ndarray:
    w = np.zeros_like(x)
    d = np.diff(x)
    w[:-1] += d / 2
    w[1:] += d / 2
    return w


def energy_grid(eps_max: float, n_points: int) -> np.ndarray:
    """Grid from 0 to eps_max, uniform in sqrt(eps)."""
    return np.linspace(0.0, math.sqrt(eps_max), n_points) ** 2


def default_grid(t_csl: float, rate_t: float, eps_extent: float, tol: float = 1e-12, points_per_width: float = 10.0) -> np.ndarray:
    """Grid wide enough to hold the series solution up to ``rate_t = lambda A^2 t``.

    ``eps_extent`` is the energy beyond which the initial distribution is
    negligible.
    """
    s_max = max(1, _series_terms(rate_t, tol))
    spread = math.sqrt(s_max * t_csl / 4)
    z_max = math.sqrt(eps_extent) + 9.0 * spread
    step = math.sqrt(t_csl / 4) / points_per_width
    return energy_grid(z_max**2, int(math.ceil(z_max / step)) + 1)


def _kernel_z(z, zp, width2):
    # exp(-2(z-z')^2/w) - exp(-2(z+z')^2/w), written to stay accurate when
    # the two terms nearly cancel
    return np.exp(-2 * (z - zp) ** 2 / width2) * -np.expm1(-8 * z * zp / width2)


def energy_kernel_sqrt_measure(eps, eps_p, t_csl: float):
    """Rate kernel against d(sqrt eps'), units 1/sqrt(nK)."""
    z, zp = np.sqrt(eps), np.sqrt(eps_p)
    return _kernel_z(z, zp, t_csl) / math.sqrt(math.pi * t_csl / 2)


def energy_kernel(eps, eps_p, t_csl: float):
    """Transition density per unit final energy (1/nK) from eps_p to eps.

    Integrates to one over eps for every eps_p, so particle number is
    conserved; equals the d(sqrt eps') kernel divided by 2 sqrt(eps').
    """
    if t_csl <= 0:
        raise DomainError("t_csl must be positive")
    z = np.sqrt(np.asarray(eps, dtype=float))
    zp = np.sqrt(np.asarray(eps_p, dtype=float))
    x = 8 * z * zp / t_csl
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(zp > 0, -np.expm1(-x) / np.where(zp > 0, 2 * zp, 1.0), 4 * z / t_csl)
    out = np.exp(-2 * (z - zp) ** 2 / t_csl) * ratio / math.sqrt(math.pi * t_csl / 2)
    return out if out.ndim else float(out)


def poisson_weights(rate_t: float, s_max: int) -> np.ndarray:
    s = np.arange(s_max + 1)
    if rate_t == 0:
        return (s == 0).astype(float)
    return np.exp(-rate_t + s * math.log(rate_t) - gammaln(s + 1))


def _series_terms(rate_t: float, tol: float) -> int:
    """Index of the last series term kept: stop once the next weight < tol."""
    if rate_t == 0:
        return 0
    w = poisson_weights(rate_t, SERIES_S_MAX + 1)
    for s in range(1, SERIES_S_MAX + 1):
        if w[s + 1] < tol and s + 1 > rate_t:
            return s
    raise ConvergenceError(f"Poisson series needs more than {SERIES_S_MAX} terms at lambda A^2 t = {rate_t}")


def _series_matrix(z_out, z_in, rate_t: float, t_csl: float, tol: float) -> np.ndarray:
    s_max = _series_terms(rate_t, tol)
    w = poisson_weights(rate_t, s_max)
    zi, zj = np.meshgrid(z_out, z_in, indexing="ij")
    m = np.zeros(zi.shape)
    for s in range(1, s_max + 1):
        m += w[s] / math.sqrt(math.pi * s * t_csl / 2) * _kernel_z(zi, zj, s * t_csl)
    return m


def evolve_series(dist0: EnergyDistribution, rate_A2: float, t_csl: float, t: float, tol: float = 1e-12) -> EnergyDistribution:
    """Closed-form solution: decayed initial distribution plus Poisson-weighted
    Gaussian-smeared copies, truncated once the next weight falls below ``tol``."""
    if t < 0:
        raise DomainError("t must be >= 0")
    if not tol > 0:
        raise DomainError("tol must be positive")
    if tol < 1e-15:
        raise ConvergenceError("series tolerance below double precision", achieved=1e-15)
    if t == 0 or rate_A2 == 0:
        return EnergyDistribution(dist0.grid, dist0.values.copy(), dist0.time + t, dict(dist0.meta))
    rate_t = rate_A2 * t
    z = np.sqrt(dist0.grid)
    wz = _trapezoid_weights(z)
    m = _series_matrix(z, z, rate_t, t_csl, tol)
    values = dist0.values * math.exp(-rate_t) + m @ (wz * dist0.values)
    return EnergyDistribution(dist0.grid, values, dist0.time + t, dict(dist0.meta))


def evolve_ode(dist0: EnergyDistribution, rate_A2: float, t_csl: float, t: float, rtol: float = 1e-11) -> EnergyDistribution:
    """Direct adaptive time integration of the energy-space rate equation on the stored grid."""
    if t < 0:
        raise DomainError("t must be >= 0")
    if t == 0 or rate_A2 == 0:
        return EnergyDistribution(dist0.grid, dist0.values.copy(), dist0.time + t, dict(dist0.meta))
    z = np.sqrt(dist0.grid)
    wz = _trapezoid_weights(z)
    k = _kernel_z(z[:, None], z[None, :], t_csl) / math.sqrt(math.pi * t_csl / 2) * wz[None, :]
    scale = float(np.max(np.abs(dist0.values))) or 1.0

    def rhs(_, y):
        return rate_A2 * (k @ y - y)

    sol = solve_ivp(rhs, (0.0, t), dist0.values, method="DOP853", rtol=rtol, atol=rtol * scale * 1e-3)
    if not sol.success:
        raise ConvergenceError(f"energy-space integration failed: {sol.message}")
    return EnergyDistribution(dist0.grid, np.clip(sol.y[:, -1], 0.0, None), dist0.time + t, dict(dist0.meta))


def thermal_distribution(n_atoms: float, temperature: float, hbar_omega: float, grid: np.ndarray) -> EnergyDistribution:
    """Non-condensed ideal Bose gas in an isotropic harmonic trap above T_c.

    Uses the continuum density of states eps^2 / (2 (hbar omega)^3).
    """
    ratio = n_atoms / (temperature / hbar_omega) ** 3
    if ratio > ZETA3:
        raise DomainError("temperature is below T_c; the cloud would be partly condensed")
    fug = bose_function_inverse(3.0, ratio)
    eps = np.asarray(grid, dtype=float)
    with np.errstate(over="ignore"):
        occ = 1.0 / (np.exp(eps / temperature) / fug - 1.0)
    values = eps**2 / (2 * hbar_omega**3) * occ
    return EnergyDistribution(eps, values, 0.0, {"fugacity": fug, "n_atoms": n_atoms})


def bec_spectrum(n_atoms: float, eps1: float, rate_A2: float, t_csl: float, t: float, grid: np.ndarray, tol: float = 1e-12):
    """Cloud created from an initial condensate of ``n_atoms`` at energy ``eps1``.

    The condensate is kept as a separate, exactly decaying population, so
    no grid spike is needed. Returns (condensate population, cloud
    distribution).
    """
    if t < 0:
        raise DomainError("t must be >= 0")
    rate_t = rate_A2 * t
    ground = n_atoms * math.exp(-rate_t)
    z = np.sqrt(np.asarray(grid, dtype=float))
    if rate_t == 0:
        return ground, EnergyDistribution(z**2, np.zeros_like(z), t)
    m = _series_matrix(z, np.array([math.sqrt(eps1)]), rate_t, t_csl, tol)[:, 0]
    values = n_atoms * m / (2 * math.sqrt(eps1))
    return ground, EnergyDistribution(z**2, values, t, {"eps1": eps1})


# ---------------------------------------------------------------------------
# simple consequences


def bec_survival(n0: float, rate_A2: float, t, correction: float = 0.0):
    """Condensate population with no repopulation: n0 exp(-L[1-(4pi)^1.5 c]t).

    ``correction`` is C*(a/sigma)^3 for the ground-state shape constant C.
    """
    if n0 < 0:
        raise DomainError("n0 must be >= 0")
    rate = rate_A2 * (1 - (4 * math.pi) ** 1.5 * correction)
    return n0 * np.exp(-rate * np.asarray(t, dtype=float))


def energy_growth_rate(n: float, csl: CslParams, species: Species) -> float:
    """Total heating of N atoms, lambda A^2 N (3/4) T_CSL, in nK/s."""
    if n < 0:
        raise DomainError("n must be >= 0")
    return csl.rate_A2(species) * n * 0.75 * csl.t_csl(species)


def lambda_limit_simple(tau_exp: float, species: Species) -> float:
    """Upper bound on lambda from a measured condensate lifetime."""
    if not tau_exp > 0:
        raise DomainError("tau_exp must be positive")
    return 1.0 / (tau_exp * species.mass_number**2)
