import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cslheat.special import ZETA2, ZETA3, ZETA32, ZETA4, bose_function, bose_function_inverse, zeta_constants


def test_zeta_constants():
    z = zeta_constants()
    assert z[2] == pytest.approx(math.pi**2 / 6, rel=1e-15)
    assert z[3] == pytest.approx(1.2020569031595942, rel=1e-15)
    assert z[4] == pytest.approx(math.pi**4 / 90, rel=1e-15)
    assert round(z[3], 2) == 1.20 and round(z[4], 2) == 1.08
    assert ZETA32 == pytest.approx(2.612375348685488, rel=1e-14)
    assert (ZETA2, ZETA3, ZETA4) == (z[2], z[3], z[4])


@pytest.mark.parametrize("nu", [1.5, 2.0, 2.5, 3.0, 4.0])
@pytest.mark.parametrize("z", [0.0, 1e-6, 0.1, 0.49, 0.5, 0.51, 0.8, 0.95, 0.999, 0.999999, 1.0])
def test_bose_function_against_mpmath(nu, z):
    expected = float(mpmath.polylog(nu, z)) if z < 1 else float(mpmath.zeta(nu))
    assert bose_function(nu, z) == pytest.approx(expected, rel=1e-12, abs=1e-300)


def test_bose_function_limits():
    assert bose_function(1.5, 1e-8) == pytest.approx(1e-8, rel=1e-7)
    assert bose_function(1.5, 1.0) == pytest.approx(ZETA32, rel=1e-13)
    assert bose_function(3.0, 1.0) == pytest.approx(ZETA3, rel=1e-13)


def test_bose_function_vectorised_and_domain():
    z = np.linspace(0, 1, 11)
    out = bose_function(1.5, z)
    assert out.shape == z.shape
    assert np.all(np.diff(out) > 0)
    with pytest.raises(ValueError):
        bose_function(1.5, 1.1)
    with pytest.raises(ValueError):
        bose_function(1.0, 0.5)


@given(st.floats(0.0, 1.0), st.sampled_from([1.5, 3.0]))
def test_bose_function_inverse_round_trip(z, nu):
    assert bose_function_inverse(nu, bose_function(nu, z)) == pytest.approx(z, abs=1e-10)


@given(st.floats(0.0, 0.999), st.floats(1e-4, 1e-3))
def test_bose_function_monotone(z, dz):
    assert bose_function(1.5, z + dz) > bose_function(1.5, z)
