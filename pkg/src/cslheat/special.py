"""Riemann zeta constants and Bose functions g_nu(z) on 0 <= z <= 1."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import gamma, zeta

ZETA2 = math.pi**2 / 6
ZETA3 = float(zeta(3.0))
ZETA4 = math.pi**4 / 90
ZETA32 = float(zeta(1.5))

# Below this fugacity the plain power series is used; above it the
# expansion around z = 1 in x = -ln z.
_SWITCH = 0.5
_SERIES_TERMS = 60
_EXPANSION_TERMS = 30


def zeta_constants() -> dict[int, float]:
    return {2: ZETA2, 3: ZETA3, 4: ZETA4}


@lru_cache(maxsize=None)
def _expansion(nu: float):
    # coefficients c_k of (-x)^k / k! with zeta(nu - k); the singular term is
    # handled separately for integer orders
    ks = np.arange(_EXPANSION_TERMS)
    fact = np.array([math.factorial(int(k)) for k in ks], dtype=float)
    is_int = float(nu).is_integer()
    coef = np.empty(_EXPANSION_TERMS)
    for k in ks:
        if is_int and k == nu - 1:
            coef[k] = 0.0
        else:
            coef[k] = zeta(nu - k) / fact[k]
    return coef, is_int


def bose_function(nu: float, z):
    """Polylogarithm g_nu(z) = sum_k z^k / k^nu for 0 <= z <= 1 and nu > 1.

    The power series converges too slowly near z = 1, where the expansion in
    powers of ln z (Robinson's series) is used instead.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z < 0) or np.any(z > 1 + 1e-15):
        raise ValueError("bose_function requires 0 <= z <= 1")
    if nu <= 1:
        raise ValueError("bose_function requires nu > 1")
    z = np.minimum(z, 1.0)
    out = np.empty_like(z)

    low = z < _SWITCH
    if np.any(low):
        zl = z[low]
        k = np.arange(1, _SERIES_TERMS + 1)
        out[low] = np.sum(zl[..., None] ** k / k**nu, axis=-1)

    high = ~low
    if np.any(high):
        x = -np.log(z[high])
        coef, is_int = _expansion(float(nu))
        k = np.arange(_EXPANSION_TERMS)
        poly = np.sum(coef * (-x[..., None]) ** k, axis=-1)
        if is_int:
            n = int(nu)
            harmonic = sum(1.0 / j for j in range(1, n))
            with np.errstate(divide="ignore", invalid="ignore"):
                sing = (-x) ** (n - 1) / math.factorial(n - 1) * (harmonic - np.log(x))
            sing = np.where(x > 0, sing, 0.0)
        else:
            sing = gamma(1 - nu) * x ** (nu - 1)
        out[high] = poly + sing
    return out if out.ndim else float(out)


def bose_function_inverse(nu: float, value: float) -> float:
    """Fugacity z in [0, 1] with g_nu(z) = value (value <= zeta(nu))."""
    from scipy.optimize import brentq

    top = float(zeta(nu))
    if value < 0 or value > top * (1 + 1e-14):
        raise ValueError(f"g_{nu} takes values in [0, {top}]")
    if value >= top:
        return 1.0
    return brentq(lambda z: bose_function(nu, z) - value, 0.0, 1.0, xtol=1e-15, rtol=1e-14)
