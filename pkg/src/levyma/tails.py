"""Certified tail sums for power-law kernels and autocorrelations.

The fractional kernels decay like ``s**(d-1)`` (or ``s**(d-2)`` after
differencing), so lattice sums and integrals over their tails converge far
too slowly for brute-force truncation at any useful tolerance.  Everything
here expands the tail in inverse powers and reduces it to closed forms:

* lattice sums  ``sum_{k>K} (x + k r)**(-s)``  become Hurwitz zeta values,
* integral tails ``int_T^inf y**(-s) dy`` become elementary powers.

A kernel tail is represented by the coefficients ``b[1..M]`` of the
asymptotic series ``f(y) ~ sum_m b[m] * y**(d-m)``, valid once ``y`` clears
the kernel's breakpoints.  Products of two such series (kernel foldings,
autocorrelation products) keep the same shape with exponent base ``2d`` or
``4d``, so one set of helpers covers folds, covariance sums and moment
integrals.  Each helper also returns the magnitude of its highest retained
order as a truncation certificate; with the default order and offsets the
certificates sit near machine precision.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import zeta as _hurwitz_zeta

__all__ = [
    "binom_coeffs",
    "fold_tail",
    "pair_integral_tail",
    "power_integral_tail",
    "lattice_power_tail",
    "rho_shape_series",
    "shift_series",
    "series_product",
    "zeta_product_tail",
]

DEFAULT_ORDER = 14


def binom_coeffs(alpha: float, max_order: int) -> np.ndarray:
    """Generalized binomial coefficients C(alpha, k) for k = 0..max_order."""
    out = np.empty(max_order + 1)
    out[0] = 1.0
    for k in range(1, max_order + 1):
        out[k] = out[k - 1] * (alpha - k + 1) / k
    return out


def _zeta(s: float, a: np.ndarray | float) -> np.ndarray | float:
    # scipy's Hurwitz zeta needs s > 1; callers guarantee that.
    return _hurwitz_zeta(s, a)


def fold_tail(
    b: np.ndarray,
    d: float,
    x: np.ndarray | float,
    q_shift: float,
    r: float,
    K: int,
    order: int = DEFAULT_ORDER,
    mirrored: bool = False,
) -> tuple[np.ndarray | float, float]:
    """Tail of a lattice folding past ``K`` terms.

    Computes ``sum_{k>K} f(x + k r) f(x + k r + q_shift)`` for a kernel whose
    tail is ``f(y) ~ sum_m b[m] y**(d-m)``.  With ``mirrored=True`` the
    arguments run to minus infinity instead: the sum becomes
    ``sum_{k>K} f(-(k r - x)) f(-(k r - x - q_shift))`` with ``b`` holding the
    left-tail coefficients of ``f(-y)``.

    ``x`` may be an array (one offset per quadrature node).  Requires
    ``(K+1)*r - |x| - |q_shift|`` to clear the series' convergence region;
    callers pick ``K`` accordingly.
    """
    x = np.asarray(x, dtype=float)
    sign = -1.0 if mirrored else 1.0
    a = (K + 1) + sign * x / r  # Hurwitz offset, > K for mirrored case too
    total = np.zeros_like(a)
    top = 0.0
    qr = sign * q_shift
    for m in range(1, order):
        for l in range(1, order - m + 1):
            shift_binom = binom_coeffs(d - l, order - m - l)
            for j in range(0, order - m - l + 1):
                s = m + l + j - 2.0 * d
                coef = b[m] * b[l] * shift_binom[j] * qr**j * r ** (2.0 * d - m - l - j)
                if coef == 0.0:
                    continue
                term = coef * _zeta(s, a)
                total += term
                if m + l + j == order:
                    top = max(top, float(np.max(np.abs(term))))
    return total, top


def pair_integral_tail(
    b: np.ndarray,
    d: float,
    tau: float,
    T: float,
    order: int = DEFAULT_ORDER,
) -> tuple[float, float]:
    """``int_T^inf f(y) f(y + tau) dy`` for a series-tailed kernel."""
    total = 0.0
    top = 0.0
    for m in range(1, order):
        for l in range(1, order - m + 1):
            shift_binom = binom_coeffs(d - l, order - m - l)
            for j in range(0, order - m - l + 1):
                p = 2.0 * d + 1.0 - m - l - j
                coef = b[m] * b[l] * shift_binom[j] * tau**j
                if coef == 0.0:
                    continue
                term = coef * T**p / (m + l + j - 2.0 * d - 1.0)
                total += term
                if m + l + j == order:
                    top = max(top, abs(term))
    return total, top


def power_integral_tail(
    b: np.ndarray, d: float, power: int, T: float, order: int = DEFAULT_ORDER
) -> tuple[float, float]:
    """``int_T^inf f(y)**power dy`` for power in {2, 4}."""
    if power not in (2, 4):
        raise ValueError("power must be 2 or 4")
    # f**2 has coefficients conv(b, b) against exponents 2d - t.
    e = np.convolve(b, b)
    base = 2.0 * d
    if power == 4:
        e = np.convolve(e, e)
        base = 4.0 * d
    total = 0.0
    top = 0.0
    tmax = min(len(e) - 1, order + power - 2)
    for t in range(power // 2, tmax + 1):
        if e[t] == 0.0:
            continue
        p = base + 1.0 - t
        term = e[t] * T**p / (t - base - 1.0)
        total += term
        if t == tmax:
            top = abs(term)
    return total, top


def lattice_power_tail(
    b: np.ndarray,
    d: float,
    x: np.ndarray | float,
    r: float,
    K: int,
    order: int = DEFAULT_ORDER,
) -> np.ndarray | float:
    """``sum_{k>K} f(x + k r)**2`` via the squared series and Hurwitz zeta."""
    x = np.asarray(x, dtype=float)
    a = (K + 1) + x / r
    e = np.convolve(b, b)
    total = np.zeros_like(a)
    tmax = min(len(e) - 1, order)
    for t in range(2, tmax + 1):
        if e[t] == 0.0:
            continue
        s = t - 2.0 * d
        total += e[t] * r ** (2.0 * d - t) * _zeta(s, a)
    return total


def rho_shape_series(flavor: str, d: float, order: int = DEFAULT_ORDER) -> np.ndarray:
    """Large-lag expansion of the fractional autocorrelation shape.

    Returns ``R`` with ``rho(k) ~ sum_t R[t] * k**(2d+1-t)``.  ``flavor`` is
    ``"noise"`` for the second-difference shape
    ``(|k+1|^(2d+1) - 2|k|^(2d+1) + |k-1|^(2d+1)) / 2`` and ``"differenced"``
    for the fourth-difference shape of the once-differenced noise.
    """
    c = binom_coeffs(2.0 * d + 1.0, order)
    R = np.zeros(order + 1)
    if flavor == "noise":
        for t in range(2, order + 1, 2):
            R[t] = c[t]
    elif flavor == "differenced":
        denom = 8.0 - 2.0 ** (2.0 * d + 2.0)
        for t in range(2, order + 1, 2):
            R[t] = c[t] * (8.0 - 2.0 ** (t + 1)) / denom
    else:
        raise ValueError(f"unknown shape flavor {flavor!r}")
    return R


def shift_series(R: np.ndarray, d: float, shift: int) -> np.ndarray:
    """Re-expand ``rho(k + shift)`` in powers of ``k``."""
    order = len(R) - 1
    out = np.zeros_like(R)
    if shift == 0:
        return R.copy()
    for t in range(order + 1):
        if R[t] == 0.0:
            continue
        c = binom_coeffs(2.0 * d + 1.0 - t, order - t)
        for j in range(order - t + 1):
            out[t + j] += R[t] * c[j] * shift**j
    return out


def series_product(R1: np.ndarray, R2: np.ndarray) -> np.ndarray:
    """Product series, exponent base ``4d+2``: index = summed order."""
    order = len(R1) - 1
    return np.convolve(R1, R2)[: order + 1]


def zeta_product_tail(P: np.ndarray, d: float, K: int) -> tuple[float, float]:
    """``sum_{k>K} sum_t P[t] k**(4d+2-t)`` with a top-order certificate.

    Every retained order must satisfy ``t - 4d - 2 > 1``; lower orders with
    nonzero coefficients mean the sum diverges and are reported as such.
    """
    total = 0.0
    top = 0.0
    tmax = len(P) - 1
    for t in range(tmax + 1):
        if P[t] == 0.0:
            continue
        s = t - 4.0 * d - 2.0
        if s <= 1.0:
            raise ArithmeticError("tail sum does not converge at this order")
        term = P[t] * float(_zeta(s, K + 1.0))
        total += term
        if t == tmax:
            top = abs(term)
    return total, top


def unit_tail_coeffs(family: str, d: float, order: int = DEFAULT_ORDER) -> np.ndarray:
    """Right-tail series coefficients of the unit-scale fractional kernels.

    ``fractional_plus``:   (y^d - (y-1)^d) / Gamma(d+1), valid y > 1.
    ``fractional_abs``:    y^d - (y-1)^d (no normalization), valid y > 1.
    ``fractional_abs_left``: series of f(-y) = y^d - (y+1)^d, valid y > 0.
    ``differenced``:       (y^d - 2(y-1)^d + (y-2)^d) / Gamma(d+1), y > 2.
    """
    c = binom_coeffs(d, order)
    b = np.zeros(order + 1)
    if family in ("fractional_plus", "fractional_abs"):
        for m in range(1, order + 1):
            b[m] = -c[m] * (-1.0) ** m
        if family == "fractional_plus":
            b /= math.gamma(d + 1.0)
    elif family == "fractional_abs_left":
        for m in range(1, order + 1):
            b[m] = -c[m]
    elif family == "differenced":
        for m in range(1, order + 1):
            b[m] = c[m] * (-1.0) ** m * (2.0**m - 2.0)
        b /= math.gamma(d + 1.0)
    else:
        raise ValueError(f"unknown kernel tail family {family!r}")
    return b
