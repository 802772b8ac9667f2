"""Decay models and least-squares fits for atom number and condensate fraction.

The number model integrates

    dN/dt = -3 K3 * I(N, T) - N / tau_cool

at a temperature frozen at its initial value, where I is the density
integral of the three-body polynomial. For fitting, I(N) is tabulated once
per temperature on a logarithmic grid and interpolated in log-log space.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson, solve_ivp
from scipy.interpolate import CubicSpline, PchipInterpolator
from scipy.optimize import least_squares, minimize
from scipy.stats import norm, truncnorm

from .core import Species, TrapGeometry
from .errors import ConvergenceError, DataError, DomainError
from .loss_heating import tbr_rate_per_k3
from .thermo import temperature_from_fraction

K3_UNIT = 1e-41  # m^6/s, internal scale for the optimiser


@dataclass(frozen=True)
class DecaySeries:
    t: np.ndarray
    values: np.ndarray
    kind: str = "particle_number"
    sigma: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise DataError("times and values must be 1-D arrays of equal length")
        if np.any(np.diff(t) <= 0):
            raise DataError("times must be strictly increasing")
        if self.kind not in ("particle_number", "condensate_fraction"):
            raise DataError(f"unknown series kind {self.kind!r}")
        if self.kind == "particle_number" and np.any(v <= 0):
            raise DataError("atom numbers must be positive")
        if self.kind == "condensate_fraction" and np.any((v <= 0) | (v > 1)):
            raise DataError("fractions must lie in (0, 1]")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)
        if self.sigma is not None:
            s = np.asarray(self.sigma, dtype=float)
            if s.shape != t.shape or np.any(s <= 0):
                raise DataError("per-point uncertainties must be positive and match the data")
            object.__setattr__(self, "sigma", s)

    def __len__(self):
        return len(self.t)


@dataclass
class FitResult:
    kind: str
    names: tuple
    values: np.ndarray
    covariance: np.ndarray
    rss: float
    n_points: int
    derived: dict = field(default_factory=dict)

    @property
    def sigmas(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def _index(self, name) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(name) from None

    def __getitem__(self, name):
        return float(self.values[self._index(name)])

    def sigma(self, name) -> float:
        return float(self.sigmas[self._index(name)])

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "rss": self.rss, "n_points": self.n_points}
        for name, v, s in zip(self.names, self.values, self.sigmas):
            out[name] = float(v)
            out[name + "_sigma"] = float(s)
        out.update({k: float(v) for k, v in self.derived.items()})
        out["covariance"] = self.covariance.tolist()
        return out


# ---------------------------------------------------------------------------
# forward model


class DecayModel:
    """Number-decay right-hand side at a fixed temperature.

    With ``tabulated=True`` the TBR integral is interpolated from a table
    over [n_min, n_max]; below n_min it is extended with the local log-log
    slope.
    """

    def __init__(self, temperature: float, trap: TrapGeometry, species: Species | None = None, n_range=(1e2, 1e6), tabulated: bool = True, points: int = 241):
        if not temperature > 0:
            raise DomainError("temperature must be positive")
        self.temperature = temperature
        self.trap = trap
        self.species = species or trap.species
        self.tabulated = tabulated
        if tabulated:
            ln_n = np.linspace(math.log(n_range[0]), math.log(n_range[1]), points)
            g = np.array([tbr_rate_per_k3(math.exp(x), temperature, trap, self.species) for x in ln_n])
            self._ln_lo, self._ln_hi = ln_n[0], ln_n[-1]
            self._spline = PchipInterpolator(ln_n, np.log(g))
            self._slope_lo = float(self._spline(ln_n[0], 1))

    def _ln_rate(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x > self._ln_hi + 1e-12):
            raise DomainError(f"N={math.exp(float(np.max(x))):.3g} above the tabulated range")
        inside = self._spline(np.clip(x, self._ln_lo, self._ln_hi))
        return np.where(x < self._ln_lo, float(self._spline(self._ln_lo)) + self._slope_lo * (x - self._ln_lo), inside)

    def rate_per_k3(self, n: float) -> float:
        if n <= 0:
            return 0.0
        if not self.tabulated:
            return tbr_rate_per_k3(n, self.temperature, self.trap, self.species)
        return math.exp(float(self._ln_rate(math.log(n))))

    def dn_dt(self, n: float, k3c: float, tau_cool: float) -> float:
        return -k3c * self.rate_per_k3(n) - n / tau_cool

    def tau_n(self, k3c: float, n0: float, tau_cool: float) -> float:
        return -n0 / self.dn_dt(n0, k3c, tau_cool)

    def solve(self, k3c: float, n0: float, tau_cool: float, t_grid, rtol: float = 1e-8) -> np.ndarray:
        t_grid = np.asarray(t_grid, dtype=float)
        if k3c < 0 or not n0 > 0 or not tau_cool > 0:
            raise DomainError("decay parameters must be positive")
        if np.any(np.diff(t_grid) < 0) or t_grid[0] < 0:
            raise DomainError("t_grid must be ascending from t >= 0")

        def rhs(_, y):
            return [self.dn_dt(max(y[0], 0.0), k3c, tau_cool)]

        t_end = float(t_grid[-1])
        if t_end == 0:
            return np.full_like(t_grid, n0)
        if self.tabulated:
            return self._solve_quadrature(k3c, n0, tau_cool, t_grid)
        sol = solve_ivp(rhs, (0.0, t_end), [n0], method="RK45", t_eval=t_grid, rtol=rtol, atol=n0 * rtol * 1e-2)
        if not sol.success:
            raise ConvergenceError(f"decay integration failed: {sol.message}")
        out = sol.y[0]
        if np.any(out < 0):
            warnings.warn("model atom number crossed zero; clamped", stacklevel=2)
        return np.clip(out, 0.0, None)

    def _solve_quadrature(self, k3c, n0, tau_cool, t_grid, step: float = 2e-3):
        # autonomous 1-D ODE: t(u) = int du / (k3 G(e^u) e^-u + 1/tau) with
        # u = ln N, then invert by interpolation. G/N grows with N, so the
        # rate at N0 bounds how far u can fall by t_end.
        u0 = math.log(n0)
        span = float(t_grid[-1]) * (k3c * self.rate_per_k3(n0) / n0 + 1 / tau_cool) * 1.01 + 10 * step
        m = int(math.ceil(span / step)) | 1
        u = np.linspace(u0, u0 - span, m + 1)
        speed = k3c * np.exp(self._ln_rate(u) - u) + 1 / tau_cool
        t_of_u = cumulative_simpson(1 / speed, x=-u, initial=0.0)
        ln_n = CubicSpline(t_of_u, u)(t_grid)
        return np.exp(ln_n)


def model_number_decay(params: dict, state_template, t_grid, tabulated: bool = False, rtol: float = 1e-8) -> np.ndarray:
    """N(t) under TBR plus evaporation for ``params`` {k3c, n0, tau_cool}.

    ``state_template`` supplies the temperature, trap and species, all held
    fixed while N decays. ``tabulated=False`` evaluates the TBR integral
    afresh at every step.
    """
    model = DecayModel(state_template.temperature, state_template.trap, state_template.species, tabulated=tabulated)
    return model.solve(params["k3c"], params["n0"], params["tau_cool"], t_grid, rtol=rtol)


# ---------------------------------------------------------------------------
# fitting helpers


def _hessian(fun, x, step=1e-4):
    n = len(x)
    h = np.zeros((n, n))
    f0 = fun(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = step
        h[i, i] = (fun(x + ei) - 2 * f0 + fun(x - ei)) / step**2
        for j in range(i):
            ej = np.zeros(n)
            ej[j] = step
            h[i, j] = h[j, i] = (fun(x + ei + ej) - fun(x + ei - ej) - fun(x - ei + ej) + fun(x - ei - ej)) / (4 * step**2)
    return h


def _log_covariance(rss_fun, x, n_points, weighted):
    """Covariance of log-parameters from the RSS Hessian."""
    h = _hessian(rss_fun, x)
    try:
        inv = np.linalg.inv(h)
    except np.linalg.LinAlgError:
        inv = np.linalg.pinv(h)
    dof = max(n_points - len(x), 1)
    scale = 1.0 if weighted else rss_fun(x) / dof
    return 2 * scale * inv


def runs_test(residuals) -> tuple[int, float]:
    """Wald-Wolfowitz runs test on residual signs; returns (runs, two-sided p)."""
    r = np.asarray(residuals)
    signs = r[r != 0] > 0
    n1, n2 = int(signs.sum()), int((~signs).sum())
    if n1 == 0 or n2 == 0:
        return 1, 0.0
    runs = 1 + int(np.sum(signs[1:] != signs[:-1]))
    n = n1 + n2
    mean = 2 * n1 * n2 / n + 1
    var = 2 * n1 * n2 * (2 * n1 * n2 - n) / (n**2 * (n - 1))
    z = (runs - mean) / math.sqrt(var)
    return runs, float(2 * norm.sf(abs(z)))


def _initial_guess(data: DecaySeries, model: DecayModel):
    t, y = data.t, np.log(data.values)
    k = max(3, len(t) // 3)
    tail = np.polyfit(t[-k:], y[-k:], 1)
    tau_cool = -1 / tail[0] if tail[0] < 0 else 10 * (t[-1] - t[0])
    head = np.polyfit(t[:k], y[:k], 2 if k >= 4 else 1)
    n0 = math.exp(head[-1])
    gamma0 = -head[-2]
    excess = gamma0 - 1 / tau_cool
    g = model.rate_per_k3(n0)
    k3 = excess * n0 / g if excess > 0 and g > 0 else 0.1 * n0 / (g * tau_cool)
    return k3, n0, tau_cool


# ---------------------------------------------------------------------------
# fits


def fit_number_decay(
    data: DecaySeries,
    trap: TrapGeometry,
    species: Species | None = None,
    f0: float = 0.76,
    max_rounds: int = 3,
) -> FitResult:
    """Fit K3, N(0) and tau_cool to an atom-number decay.

    The temperature is fixed from ``f0`` at the current estimate of N(0)
    and refreshed after each round until it settles.
    """
    species = species or trap.species
    if data.kind != "particle_number":
        raise DataError("expected a particle-number series")
    if len(data) < 6:
        raise DataError("need at least 6 points for a number fit")
    weighted = data.sigma is not None
    w = 1 / data.sigma if weighted else np.ones(len(data))
    scale = 1.0 if weighted else float(np.max(data.values))

    n_est = float(data.values[0])
    temp = temperature_from_fraction(f0, n_est, trap, species)
    best = None
    for _ in range(max_rounds):
        n_hi = 4 * float(np.max(data.values))
        model = DecayModel(temp, trap, species, n_range=(n_hi * 1e-4, n_hi))

        def residuals(x):
            k3, n0, tau = K3_UNIT * math.exp(x[0]), math.exp(x[1]), math.exp(x[2])
            if n0 >= n_hi:
                return np.full(len(data), 1e3)
            return w * (model.solve(k3, n0, tau, data.t) - data.values) / scale

        def rss(x):
            r = residuals(x)
            return float(r @ r)

        k3, n0, tau = _initial_guess(data, model)
        starts = [(1, 1), (0.5, 1), (2, 1), (1, 0.5), (1, 2)]
        best = None
        for mk, mt in starts:
            x0 = np.log([max(k3 * mk, 1e-6 * K3_UNIT) / K3_UNIT, n0, tau * mt])
            nm = minimize(rss, x0, method="Nelder-Mead", options={"xatol": 1e-6, "fatol": 1e-14, "maxiter": 3000})
            ls = least_squares(residuals, nm.x, method="trf", x_scale=1.0, xtol=1e-12, ftol=1e-14, gtol=1e-14, diff_step=1e-7)
            cand = (float(ls.cost * 2), ls.x, ls.status > 0)
            if best is None or cand[0] < best[0]:
                best = cand
        if not best[2]:
            raise ConvergenceError("number-decay fit did not converge", best=np.exp(best[1]))
        n_fit = math.exp(best[1][1])
        new_temp = temperature_from_fraction(f0, n_fit, trap, species)
        settled = abs(new_temp - temp) <= 1e-4 * temp
        temp = new_temp
        if settled:
            break
    x = best[1]
    cov_log = _log_covariance(rss, x, len(data), weighted)
    values = np.array([K3_UNIT * math.exp(x[0]), math.exp(x[1]), math.exp(x[2])])
    cov = cov_log * np.outer(values, values)

    def tau_n_of(v):
        return model.tau_n(v[0], v[1], v[2])

    tau_n = tau_n_of(values)
    grad = np.array([(tau_n_of(values * (1 + 1e-6 * (np.arange(3) == i))) - tau_n) / (1e-6 * values[i]) for i in range(3)])
    tau_n_sigma = math.sqrt(max(grad @ cov @ grad, 0.0))
    res = residuals(x)
    runs, p_runs = runs_test(res)
    noise = float(np.std(res)) * scale
    if not weighted and np.any(np.diff(data.values) > 5 * max(noise, 1e-12)):
        warnings.warn("data increase beyond the residual noise; fit may be degenerate", stacklevel=2)
    return FitResult(
        "particle_number",
        ("k3c", "n0", "tau_cool"),
        values,
        cov,
        float(res @ res) * (scale**2 if not weighted else 1.0),
        len(data),
        {"tau_n": tau_n, "tau_n_sigma": tau_n_sigma, "temperature_nK": temp, "runs": runs, "runs_p": p_runs},
    )


def fit_pure_exponential(data: DecaySeries) -> FitResult:
    """Fit N0 exp(-t/tau) to a series; the comparison fit for number decays."""
    return _fit_exponential(data, ("n0", "tau"))


def fit_fraction_decay(data: DecaySeries) -> FitResult:
    """Fit f(0) exp(-t/tau_f) to a condensate-fraction series."""
    if data.kind != "condensate_fraction":
        raise DataError("expected a condensate-fraction series")
    if len(data) < 4:
        raise DataError("need at least 4 points for a fraction fit")
    return _fit_exponential(data, ("f0", "tau_f"))


def _fit_exponential(data: DecaySeries, names) -> FitResult:
    if np.any(data.values <= 0):
        raise DataError("exponential fits need positive values")
    weighted = data.sigma is not None
    w = 1 / data.sigma if weighted else np.ones(len(data))
    slope, icpt = np.polyfit(data.t, np.log(data.values), 1)
    tau0 = -1 / slope if slope < 0 else 100 * (data.t[-1] - data.t[0] + 1)

    def residuals(x):
        return w * (math.exp(x[0]) * np.exp(-data.t * math.exp(-x[1])) - data.values)

    def rss(x):
        r = residuals(x)
        return float(r @ r)

    ls = least_squares(residuals, [icpt, math.log(tau0)], method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    if ls.status <= 0:
        raise ConvergenceError("exponential fit did not converge", best=np.exp(ls.x))
    values = np.exp(ls.x)
    if rss(ls.x) < 1e-28:
        cov = np.zeros((2, 2))
    else:
        cov = _log_covariance(rss, ls.x, len(data), weighted) * np.outer(values, values)
    kind = data.kind
    return FitResult(kind, tuple(names), values, cov, rss(ls.x), len(data))


# ---------------------------------------------------------------------------
# Monte Carlo propagation


def propagate_uncertainty(inputs: dict, func, n_samples: int = 2000, seed: int = 0, bounds: dict | None = None) -> dict:
    """Push Gaussian input uncertainties through ``func`` by Monte Carlo.

    ``inputs`` maps name -> (value, sigma); ``func(values: dict) -> dict``
    of output floats. Inputs are drawn from normals truncated to
    ``bounds[name] = (lo, hi)`` (default (0, inf)). Returns, per output,
    a dict with the nominal value, the sample mean and standard deviation.
    """
    bounds = bounds or {}
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    names = sorted(inputs)
    u = rng.random((n_samples, len(names)))
    draws = {}
    for j, name in enumerate(names):
        mu, sd = inputs[name]
        if sd == 0 or n_samples == 0:
            draws[name] = np.full(n_samples, float(mu))
            continue
        lo, hi = bounds.get(name, (0.0, math.inf))
        a, b = (lo - mu) / sd, (hi - mu) / sd
        draws[name] = truncnorm.ppf(u[:, j], a, b, loc=mu, scale=sd)
    nominal = func({k: float(v[0]) for k, v in inputs.items()})
    samples = {k: np.empty(n_samples) for k in nominal}
    for i in range(n_samples):
        out = func({k: float(draws[k][i]) for k in names})
        for k in nominal:
            samples[k][i] = out[k]
    result = {}
    for k, v in nominal.items():
        s = samples[k]
        result[k] = {
            "nominal": float(v),
            "mean": float(s.mean()) if n_samples else float(v),
            "std": float(s.std(ddof=1)) if n_samples > 1 else 0.0,
        }
    return result


# ---------------------------------------------------------------------------
# synthetic data


def synthetic_number_series(k3c, n0, tau_cool, trap: TrapGeometry, f0: float, t, noise: float = 0.02, seed: int = 0, species: Species | None = None) -> DecaySeries:
    """Model N(t) with multiplicative Gaussian noise (fixed seed)."""
    species = species or trap.species
    temp = temperature_from_fraction(f0, n0, trap, species)
    model = DecayModel(temp, trap, species, tabulated=False)
    clean = model.solve(k3c, n0, tau_cool, t)
    rng = np.random.default_rng(seed)
    return DecaySeries(t, clean * (1 + noise * rng.standard_normal(len(clean))))


def synthetic_fraction_series(f0, tau_f, t, noise: float = 0.03, seed: int = 0) -> DecaySeries:
    """f0 exp(-t/tau_f) with multiplicative Gaussian noise, clipped to (0, 1]."""
    t = np.asarray(t, dtype=float)
    rng = np.random.default_rng(seed)
    clean = f0 * np.exp(-t / tau_f)
    noisy = np.clip(clean * (1 + noise * rng.standard_normal(len(t))), 1e-6, 1.0)
    return DecaySeries(t, noisy, "condensate_fraction")
