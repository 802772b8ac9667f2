"""Energy audit of a decaying condensate and the resulting bound on lambda.

The measured energy change per atom follows from the initial slopes of
N(t) and f(t) through the Hartree-Fock derivatives; subtracting the known
channels (evaporation, three-body heating, background collisions, laser
jitter) leaves a residual R_in that bounds the CSL heating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import CslParams, Species, TrapGeometry, t_csl_of
from .errors import DomainError
from .fitting import propagate_uncertainty
from .loss_heating import background_energy_rate, evap_cooling_rate, tbr_heating_rate, trap_jitter_rate
from .thermo import hf_derivatives, hf_state, temperature_from_fraction

TAU_BACKGROUND = 320.0  # s
CHANNELS = ("cool", "tbr_heat", "background", "jitter")
FITTED_KEYS = ("n0", "f0", "tau_n", "tau_f", "k3c", "tau_cool")


@dataclass(frozen=True)
class Measured:
    value: float
    sigma: float = 0.0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise DomainError("uncertainties must be >= 0")

    def as_tuple(self):
        return (self.value, self.sigma)


@dataclass(frozen=True)
class AuditInput:
    """Fitted quantities for one trap plus the environment.

    ``fitted`` maps n0, f0, tau_n, tau_f, tau_cool (and optionally k3c) to
    :class:`Measured` values; lifetimes may be ``math.inf``.
    """

    trap: TrapGeometry
    fitted: dict
    species: Species | None = None
    tau_1: Measured = Measured(TAU_BACKGROUND)
    jitter_psd: float = 0.0
    a_csl: float = 1e-7
    channels: tuple = CHANNELS
    eta: float | None = None
    name: str = ""

    def __post_init__(self):
        fitted = {k: v if isinstance(v, Measured) else Measured(*np.atleast_1d(v)) for k, v in self.fitted.items()}
        missing = {"n0", "f0", "tau_n", "tau_f"} - set(fitted)
        if "cool" in self.channels:
            missing |= {"tau_cool"} - set(fitted)
        if missing:
            raise DomainError(f"missing fitted values: {sorted(missing)}")
        unknown = set(fitted) - set(FITTED_KEYS)
        if unknown:
            raise DomainError(f"unknown fitted values: {sorted(unknown)}")
        for k in ("tau_n", "tau_f", "tau_cool"):
            if k in fitted and not fitted[k].value > 0:
                raise DomainError(f"{k} must be positive")
        if not 0 < fitted["f0"].value < 1:
            raise DomainError("f0 must lie in (0, 1)")
        if not set(self.channels) <= set(CHANNELS):
            raise DomainError(f"channels must be a subset of {CHANNELS}")
        object.__setattr__(self, "fitted", fitted)
        if self.species is None:
            object.__setattr__(self, "species", self.trap.species)

    @property
    def csl(self) -> CslParams:
        return CslParams(0.0, self.a_csl)


@dataclass
class AuditReport:
    name: str
    du_dt_exp: Measured
    channels: dict
    w: Measured
    r_in: Measured
    lambda_bound: Measured
    constraining: bool
    dt_dt: float
    thermo: dict
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "du_dt_exp_nK_per_s": self.du_dt_exp.value,
            "du_dt_exp_sigma_nK_per_s": self.du_dt_exp.sigma,
            "dT_dt_nK_per_s": self.dt_dt,
        }
        chans = {}
        for k, m in self.channels.items():
            chans[f"{k}_nK_per_s"] = m.value
            chans[f"{k}_sigma_nK_per_s"] = m.sigma
        chans["w_nK_per_s"] = self.w.value
        chans["w_sigma_nK_per_s"] = self.w.sigma
        out["channels"] = chans
        out["r_in"] = {
            "r_in_nK_per_s": self.r_in.value,
            "r_in_sigma_nK_per_s": self.r_in.sigma,
            "lambda_bound_per_s": self.lambda_bound.value,
            "lambda_sigma_per_s": self.lambda_bound.sigma,
            "constraining": self.constraining,
        }
        out["thermo"] = dict(self.thermo)
        out["flags"] = list(self.flags)
        return out


def _rate(tau: float) -> float:
    return 0.0 if math.isinf(tau) else 1.0 / tau


def _evaluate(inp: AuditInput, v: dict) -> dict:
    """All audit quantities for one set of input values (no uncertainties)."""
    trap, species = inp.trap, inp.species
    temp = temperature_from_fraction(v["f0"], v["n0"], trap, species, eta=inp.eta)
    state = hf_state(v["n0"], temp, trap, species, eta=inp.eta)
    d = hf_derivatives(state)
    if d.f_t == 0:
        raise DomainError("df/dT vanishes; the audit is singular")
    r_n, r_f = _rate(v["tau_n"]), _rate(v["tau_f"])
    # the fraction at t=0 is the fitted one, which hf_state reproduces
    dt_dt = (d.f_n * r_n - state.f * r_f) / d.f_t
    du = d.c * dt_dt - d.mu_n * r_n
    ch = {}
    if "cool" in inp.channels and trap.e_b_valid:
        ch["cool"] = evap_cooling_rate(trap, v["tau_cool"])
    if "tbr_heat" in inp.channels:
        ch["tbr_heat"] = 0.0 if r_n == 0 else tbr_heating_rate(state, v["tau_n"])
    if "background" in inp.channels:
        ch["background"] = 0.0 if math.isinf(v["tau_1"]) else background_energy_rate(state, v["tau_1"])
    if "jitter" in inp.channels:
        ch["jitter"] = trap_jitter_rate(trap, inp.jitter_psd)
    w = sum(ch.values())
    out = {"du_dt_exp": du, "dt_dt": dt_dt, "w": w, "r_in": du - w}
    out.update({f"ch_{k}": x for k, x in ch.items()})
    out["thermo"] = {
        "temperature_nK": temp,
        "t_c_nK": state.t_c,
        "s_dimensionless": state.s,
        "eta_dimensionless": state.eta,
        "mu_nK": state.mu,
        "f_fraction": state.f,
        "u_per_n_nK": state.u_per_n,
        "heat_capacity_kB": d.c,
        "mu_n_nK": d.mu_n,
        "f_t_per_nK": d.f_t,
        "f_n_dimensionless": d.f_n,
        "zero_point_nK": trap.zero_point,
        "e_b_nK": trap.e_b,
    }
    return out


def _values(inp: AuditInput) -> dict:
    v = {k: m.value for k, m in inp.fitted.items()}
    v["tau_1"] = inp.tau_1.value
    return v


def du_dt_experimental(inp: AuditInput) -> float:
    """Measured energy change per atom (nK/s) from the initial slopes."""
    return _evaluate(inp, _values(inp))["du_dt_exp"]


def dT_dt_initial(inp: AuditInput) -> float:
    """Initial rate of temperature change (nK/s)."""
    return _evaluate(inp, _values(inp))["dt_dt"]


def lambda_bound(r_in: float, sigma: float, species: Species, a_csl: float = 1e-7):
    """Bound on lambda (1/s) from a residual heating rate per atom.

    Returns (value, sigma, constraining). A non-positive residual gives 0
    and ``constraining=False``: nothing is left to attribute to CSL.
    """
    factor = 4 / (3 * species.mass_number**2 * t_csl_of(species, a_csl))
    if r_in <= 0:
        return 0.0, sigma * factor, False
    return r_in * factor, sigma * factor, True


def residual_heating(inp: AuditInput, n_samples: int = 2000, seed: int = 0) -> AuditReport:
    """Full audit of one trap with Monte Carlo uncertainties.

    Central values come from the nominal inputs, so r_in + w equals
    du_dt_exp exactly; the quoted sigmas are Monte Carlo standard
    deviations.
    """
    nominal = _evaluate(inp, _values(inp))
    flags = []
    if "cool" in inp.channels and not inp.trap.e_b_valid:
        flags.append("evaporation channel omitted: trap depth below zero-point energy")
    inputs = {k: m.as_tuple() for k, m in inp.fitted.items()}
    inputs["tau_1"] = inp.tau_1.as_tuple()
    bounds = {"f0": (0.0, 1.0)}

    def scalar(v):
        out = _evaluate(inp, v)
        return {k: x for k, x in out.items() if k != "thermo"}

    mc = propagate_uncertainty(inputs, scalar, n_samples=n_samples, seed=seed, bounds=bounds)
    sd = {k: mc[k]["std"] for k in mc}
    channels = {k[3:]: Measured(nominal[k], sd[k]) for k in nominal if k.startswith("ch_")}
    r_in = Measured(nominal["r_in"], sd["r_in"])
    lam, lam_sd, constraining = lambda_bound(r_in.value, r_in.sigma, inp.species, inp.a_csl)
    return AuditReport(
        inp.name,
        Measured(nominal["du_dt_exp"], sd["du_dt_exp"]),
        channels,
        Measured(nominal["w"], sd["w"]),
        r_in,
        Measured(lam, lam_sd),
        constraining,
        nominal["dt_dt"],
        nominal["thermo"],
        flags,
    )


def aggregate_traps(reports, species: Species, a_csl: float = 1e-7, weighting: str = "unweighted") -> dict:
    """Combine per-trap residuals into a mean and a lambda bound.

    The uncertainty is the larger of the scatter-based standard error and
    the propagated uncertainty of the mean.
    """
    if not reports:
        return {"n_traps": 0, "r_in_mean_nK_per_s": None, "r_in_sigma_nK_per_s": None, "lambda_bound_per_s": None, "lambda_sigma_per_s": None}
    x = np.array([r.r_in.value for r in reports])
    s = np.array([r.r_in.sigma for r in reports])
    n = len(x)
    if weighting == "inverse_variance":
        if np.any(s <= 0):
            raise DomainError("inverse-variance weighting needs positive sigmas")
        w = 1 / s**2
        mean = float(np.sum(w * x) / np.sum(w))
        propagated = float(1 / math.sqrt(np.sum(w)))
    elif weighting == "unweighted":
        mean = float(x.mean())
        propagated = float(math.sqrt(np.sum(s**2)) / n)
    else:
        raise DomainError(f"unknown weighting {weighting!r}")
    scatter = float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    sigma = max(scatter, propagated)
    lam, lam_sd, constraining = lambda_bound(mean, sigma, species, a_csl)
    return {
        "n_traps": n,
        "r_in_mean_nK_per_s": mean,
        "r_in_sigma_nK_per_s": sigma,
        "lambda_bound_per_s": lam,
        "lambda_sigma_per_s": lam_sd,
        "constraining": constraining,
    }
