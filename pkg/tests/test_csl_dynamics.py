import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.special import eval_genlaguerre, gammaln

from cslheat.core import CS133, CslParams
from cslheat.csl_dynamics import (
    HARMONIC_C,
    TF_C_QUOTED,
    DiscreteOccupations,
    EnergyDistribution,
    LevelBasis,
    bec_spectrum,
    bec_survival,
    coupling_closed_form,
    coupling_matrix,
    coupling_numeric_1d,
    default_grid,
    discrete_generator,
    energy_growth_rate,
    energy_grid,
    energy_kernel,
    energy_kernel_sqrt_measure,
    evolve_discrete,
    evolve_ode,
    evolve_series,
    hermite_functions,
    lambda_limit_simple,
    poisson_weights,
    tf_shape_constant,
    thermal_distribution,
)
from cslheat.errors import ConvergenceError, CutoffLeakageError, DomainError

# population scenario used for the spectra: 5000 atoms, level spacing 5 nK
N_ATOMS, T_START, HW, T_CSL, RATE, T_END = 5000.0, 85.0, 5.0, 500.0, 0.01, 500.0


@pytest.fixture(scope="module")
def cloud():
    grid = default_grid(T_CSL, RATE * T_END, 40 * T_START, tol=1e-12)
    return thermal_distribution(N_ATOMS, T_START, HW, grid)


def harmonic_laguerre(n, m, alpha):
    # |<n|exp(ikx)|m>|^2 averaged over the Fourier transform of the Gaussian
    n, m = max(n, m), min(n, m)

    def f(k):
        b = k * k / 2
        log_pref = gammaln(m + 1) - gammaln(n + 1) + (n - m) * np.log(b) - b if b > 0 else (0.0 if n == m else -np.inf)
        return alpha / math.sqrt(math.pi) * math.exp(-(alpha * k) ** 2 + log_pref) * eval_genlaguerre(m, n - m, b) ** 2

    top = math.sqrt(2 * n + 1) + 12
    return integrate.quad(f, 0, top, limit=400, epsabs=1e-13, epsrel=1e-11)[0] * 2


def box_dblquad(n, m, alpha):
    def f(y, x):
        return (2 / math.pi) ** 2 * math.sin(n * x) * math.sin(m * x) * math.sin(n * y) * math.sin(m * y) * math.exp(-((x - y) ** 2) / (4 * alpha**2))

    return integrate.dblquad(f, 0, math.pi, 0, math.pi, epsabs=1e-12, epsrel=1e-10)[0]


# ---------------------------------------------------------------------------
# couplings


def test_hermite_orthonormal():
    x = np.linspace(-15, 15, 6001)
    h = hermite_functions(12, x)
    gram = np.trapezoid(h[:, None] * h[None], x, axis=-1)
    assert np.allclose(gram, np.eye(13), atol=1e-10)


@pytest.mark.parametrize("n,m,alpha", [(0, 0, 0.3), (3, 1, 0.2), (6, 6, 0.1), (12, 9, 0.15)])
def test_harmonic_numeric_matches_laguerre(n, m, alpha):
    b = LevelBasis("harmonic", alpha)
    assert coupling_numeric_1d(n, m, b) == pytest.approx(harmonic_laguerre(n, m, alpha), rel=1e-7, abs=1e-13)


@pytest.mark.parametrize("n,m,alpha", [(1, 1, 0.3), (2, 3, 0.25), (4, 4, 0.2)])
def test_box_numeric_matches_dblquad(n, m, alpha):
    b = LevelBasis("box", alpha)
    assert coupling_numeric_1d(n, m, b) == pytest.approx(box_dblquad(n, m, alpha), rel=1e-7)


@given(st.integers(1, 25), st.integers(1, 25), st.floats(0.03, 0.3))
@settings(max_examples=25)
def test_coupling_symmetric(n, m, alpha):
    b = LevelBasis("box", alpha)
    assert coupling_numeric_1d(n, m, b) == pytest.approx(coupling_numeric_1d(m, n, b), rel=1e-8, abs=1e-13)
    assert coupling_closed_form(n, m, b) == pytest.approx(coupling_closed_form(m, n, b), rel=1e-14)


def test_box_sum_rule():
    b = LevelBasis("box", 0.3)
    total = sum(coupling_numeric_1d(n, 5, b) for n in range(1, 60))
    assert total == pytest.approx(1.0, abs=1e-5)


def test_harmonic_sum_rule():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        b = LevelBasis("harmonic", 1.0)
    total = sum(coupling_numeric_1d(n, 3, b) for n in range(0, 60))
    assert total == pytest.approx(1.0, abs=1e-10)


def test_closed_form_frozen_values():
    assert coupling_closed_form(20, 20, LevelBasis("box", 0.05)) == pytest.approx(0.05 / math.sqrt(math.pi) * (1 + math.exp(-4)), rel=1e-14)
    with pytest.raises(DomainError):
        coupling_closed_form(0, 1, LevelBasis("box", 0.05))


def test_box_off_diagonal_close_to_closed_form():
    b = LevelBasis("box", 0.05)
    assert coupling_numeric_1d(10, 12, b) == pytest.approx(coupling_closed_form(10, 12, b), rel=0.02)


def test_harmonic_closed_form_normalised_in_continuum():
    # integral over n of the closed form is one (substitute u = sqrt(n))
    alpha, m = 0.05, 4000.0
    b = LevelBasis("harmonic", alpha)
    val = integrate.quad(lambda n: coupling_closed_form(n, m, b), 1, 30000, points=[m], limit=400)[0]
    assert val == pytest.approx(1.0, abs=1e-3)
    # the same substitution turns the Gaussian normalisation into pi/2
    c = integrate.quad(lambda u: math.exp(-(u**2)), -np.inf, np.inf)[0] ** 2 / 2
    assert c == pytest.approx(math.pi / 2)


def test_shape_constants():
    assert HARMONIC_C == pytest.approx((2 * math.pi) ** -1.5)
    # integral of phi0^4 for a unit-width Gaussian ground state
    x = np.linspace(-10, 10, 20001)
    phi2 = math.pi**-1.5 * np.exp(-(x**2)) ** 1
    g1 = np.trapezoid((math.pi**-0.5 * np.exp(-(x**2))) ** 2, x)
    assert g1**3 == pytest.approx(HARMONIC_C, rel=1e-10)
    assert np.all(phi2 > 0)
    assert tf_shape_constant() == pytest.approx(0.4648, abs=1e-4)
    # the quoted value does not follow from the stated profile
    assert tf_shape_constant() != pytest.approx(TF_C_QUOTED, rel=0.5)


def test_level_basis_validation():
    with pytest.raises(DomainError):
        LevelBasis("ring", 0.1)
    with pytest.raises(DomainError):
        LevelBasis("box", 0.0)
    with pytest.warns(UserWarning):
        LevelBasis("box", 0.5)
    b = LevelBasis.from_lengths("box", 1e-6, 5e-8)
    assert b.alpha == pytest.approx(math.pi * 0.05)
    assert LevelBasis.from_lengths("harmonic", 1e-6, 1e-7).alpha == pytest.approx(0.1)


def test_numeric_coupling_convergence_error():
    with pytest.raises(ConvergenceError):
        coupling_numeric_1d(40, 40, LevelBasis("box", 0.05), rtol=1e-30, atol=0.0, max_doublings=2)


# ---------------------------------------------------------------------------
# discrete populations


@pytest.mark.parametrize("kind", ["box", "harmonic"])
def test_coupling_matrix_columns(kind):
    b = LevelBasis(kind, 0.2)
    c, leak = coupling_matrix(b, 30 if kind == "box" else 300)
    assert np.all(c >= 0)
    assert np.allclose(c.sum(axis=0) + leak, 1.0, atol=1e-13)
    assert leak[0] < 1e-10


def test_generator_properties():
    g = discrete_generator(LevelBasis("box", 0.3), 6, rate_A2=2.0)
    assert np.all(np.diag(g) <= 0)
    off = g - np.diag(np.diag(g))
    assert np.all(off >= 0)
    assert np.all(g.sum(axis=0) <= 1e-12)


def test_evolve_discrete_identity_and_conservation():
    b = LevelBasis("box", 0.3)
    occ0 = DiscreteOccupations.ground_state(1000.0, 24, b)
    same = evolve_discrete(occ0, b, 0.5, 0.0)
    assert np.array_equal(same.occupations, occ0.occupations)
    occ = evolve_discrete(occ0, b, 1.0, 1.0)
    assert occ.total == pytest.approx(1000.0, rel=1e-6)
    assert np.all(occ.occupations > -1e-9)
    # ground state leaves at L(1 - I00^3); refilling only adds to it
    c, _ = coupling_matrix(b, 24)
    g = discrete_generator(b, 6)
    assert g[0, 0] == pytest.approx(-(1 - c[0, 0] ** 3), rel=1e-14)
    assert occ.occupations[0, 0, 0] > 1000.0 * math.exp(-(1 - c[0, 0] ** 3))
    assert occ.by_total_level().sum() == pytest.approx(occ.total)
    assert occ.time == 1.0


def test_evolve_discrete_leakage():
    b = LevelBasis("box", 0.3)
    occ0 = DiscreteOccupations.ground_state(1.0, 4, b)
    with pytest.raises(CutoffLeakageError):
        evolve_discrete(occ0, b, 1.0, 20.0)
    with pytest.raises(DomainError):
        evolve_discrete(occ0, LevelBasis("harmonic", 0.3), 1.0, 1.0)


# ---------------------------------------------------------------------------
# energy kernel


def test_kernel_normalised_and_positive():
    eps = energy_grid(20000.0, 40001)
    w = EnergyDistribution(eps, np.zeros_like(eps)).weights
    for ep in [0.0, 1e-6, 2.5, 85.0, 1000.0]:
        k = energy_kernel(eps, ep, T_CSL)
        assert np.all(k >= 0)
        assert w @ k == pytest.approx(1.0, abs=1e-8)
    assert energy_kernel(0.0, 50.0, T_CSL) == 0.0


@given(st.floats(0.01, 3000), st.floats(0.01, 3000))
def test_kernel_measures_agree(e, ep):
    a = energy_kernel(e, ep, T_CSL)
    b = energy_kernel_sqrt_measure(e, ep, T_CSL) / (2 * math.sqrt(ep))
    assert a == pytest.approx(b, rel=1e-10, abs=1e-300)


def test_kernel_bad_temperature():
    with pytest.raises(DomainError):
        energy_kernel(1.0, 1.0, 0.0)


def test_poisson_weights():
    w = poisson_weights(3.0, 80)
    assert w.sum() == pytest.approx(1.0, rel=1e-14)
    assert w @ np.arange(81) == pytest.approx(3.0)
    assert poisson_weights(0.0, 4).tolist() == [1, 0, 0, 0, 0]


# ---------------------------------------------------------------------------
# continuum evolution


def test_thermal_distribution_totals(cloud):
    assert cloud.total == pytest.approx(N_ATOMS, rel=1e-6)
    with pytest.raises(DomainError):
        thermal_distribution(N_ATOMS, 10.0, HW, cloud.grid)


def test_series_conserves_and_heats(cloud):
    e0 = cloud.energy
    for t in (50.0, 200.0, T_END):
        d = evolve_series(cloud, RATE, T_CSL, t)
        assert d.total == pytest.approx(cloud.total, rel=1e-6)
        slope = (d.energy - e0) / (cloud.total * RATE * t)
        assert slope == pytest.approx(0.75 * T_CSL, rel=1e-4)


def test_series_identity_and_semigroup(cloud):
    same = evolve_series(cloud, RATE, T_CSL, 0.0)
    assert np.array_equal(same.values, cloud.values)
    a = evolve_series(evolve_series(cloud, RATE, T_CSL, 150.0), RATE, T_CSL, 100.0)
    b = evolve_series(cloud, RATE, T_CSL, 250.0)
    assert np.sum(b.weights * np.abs(a.values - b.values)) / b.total < 1e-8


def test_series_matches_ode(cloud):
    s = evolve_series(cloud, RATE, T_CSL, T_END)
    o = evolve_ode(cloud, RATE, T_CSL, T_END)
    assert np.sum(s.weights * np.abs(s.values - o.values)) / s.total < 1e-4
    assert o.total == pytest.approx(cloud.total, rel=1e-6)


def test_series_errors(cloud):
    with pytest.raises(ConvergenceError):
        evolve_series(cloud, RATE, T_CSL, 10.0, tol=1e-16)
    with pytest.raises(ConvergenceError):
        evolve_series(cloud, 1.0, T_CSL, 400.0)
    with pytest.raises(DomainError):
        evolve_series(cloud, RATE, T_CSL, -1.0)


@given(st.floats(0.0, 4.0))
@settings(max_examples=15)
def test_series_number_conservation_property(rate_t):
    grid = default_grid(T_CSL, max(rate_t, 5.0), 40 * T_START, tol=1e-12)
    d0 = thermal_distribution(N_ATOMS, T_START, HW, grid)
    d = evolve_series(d0, rate_t / T_END, T_CSL, T_END)
    assert d.total == pytest.approx(d0.total, rel=1e-6)
    assert np.all(d.values >= 0)


def test_bec_spectrum():
    grid = default_grid(T_CSL, RATE * T_END, 10 * HW, tol=1e-12)
    for t in (0.0, 100.0, T_END):
        ground, d = bec_spectrum(N_ATOMS, HW / 2, RATE, T_CSL, t, grid)
        assert ground == pytest.approx(N_ATOMS * math.exp(-RATE * t), rel=1e-12)
        assert ground + d.total == pytest.approx(N_ATOMS, rel=1e-6)
        if t:
            heat = ground * HW / 2 + d.energy - N_ATOMS * HW / 2
            assert heat / (N_ATOMS * RATE * t) == pytest.approx(0.75 * T_CSL, rel=1e-4)


# ---------------------------------------------------------------------------
# simple consequences


def test_bec_survival():
    t = np.array([0.0, 1.0, 10.0])
    assert np.allclose(bec_survival(100.0, 0.1, t), 100 * np.exp(-0.1 * t), rtol=1e-15)
    slowed = bec_survival(100.0, 0.1, 10.0, correction=HARMONIC_C * 0.01**3)
    assert slowed > bec_survival(100.0, 0.1, 10.0)
    with pytest.raises(DomainError):
        bec_survival(-1.0, 0.1, t)


def test_energy_growth_and_simple_limit():
    csl = CslParams(1e-7, 1e-7)
    per_atom = energy_growth_rate(1.0, csl, CS133)
    assert per_atom == pytest.approx(0.75 * 1e-7 * 133**2 * csl.t_csl(CS133), rel=1e-14)
    assert per_atom == pytest.approx(0.484, abs=0.01)
    assert lambda_limit_simple(10.0, CS133) == pytest.approx(5.65e-6, rel=0.01)
    with pytest.raises(DomainError):
        lambda_limit_simple(0.0, CS133)
