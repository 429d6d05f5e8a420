"""Kernel families, lattice foldings, and theoretical autocovariances.

A kernel is a square-integrable function f driving the moving average
``X_t = mu + int f(t-s) dL_s``.  Six families are supported:

* ``fractional_plus``     -- (s_+^d - (s-D)_+^d) / Gamma(d+1), one-sided,
  the increment kernel of a fractional process with Hurst index d + 1/2;
* ``fractional_abs``      -- |s|^d - |s-D|^d, two-sided variant;
* ``differenced_fractional_plus`` -- second difference
  (s_+^d - 2(s-D)_+^d + (s-2D)_+^d) / Gamma(d+1), short-memory tail s^(d-2);
* ``step``                -- coefficients on a uniform grid of cells
  (i*eps, (i+1)*eps];
* ``indicator``           -- finite union of disjoint intervals with heights;
* ``counterexample``      -- the piecewise-polynomial kernel whose folded
  absolute sum on the unit lattice equals (1-u)^(-1/2): integrable but not
  square-integrable, which separates pointwise summability from the
  L2 condition needed by the sample-mean limit theorem.

The lattice foldings at spacing Delta,

    g_q(u)   = sum_k f(u + k*Delta) * f(u + (k+q)*Delta),
    F(u)     = sum_k |f(u + k*Delta)|,

enter the asymptotic covariance of the sample autocovariances.  For the
power-law families both are computed as a direct window plus a Hurwitz-zeta
tail with an explicit truncation certificate (see `tails`).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from . import tails
from .errors import ConfigError, NumericsError

__all__ = [
    "KernelSpec",
    "AcfModel",
    "FoldTable",
    "fractional_plus",
    "fractional_abs",
    "differenced_fractional_plus",
    "step_kernel",
    "indicator_union",
    "counterexample_kernel",
    "eval_kernel",
    "support",
    "lattice_fold",
    "lattice_abs_sum",
    "autocov_quadrature",
    "autocov_fractional_closed",
    "fractional_rho",
    "summability_diagnostics",
    "fold_table",
    "kernel_to_json",
    "kernel_from_json",
    "write_acf_csv",
    "read_acf_csv",
]

_FRACTIONAL = ("fractional_plus", "fractional_abs", "differenced_fractional_plus")
_PIECEWISE = ("step", "indicator")
_FAMILIES = _FRACTIONAL + _PIECEWISE + ("counterexample",)


@dataclass(frozen=True)
class KernelSpec:
    """One kernel function with its analytic metadata.

    ``delta`` is the increment scale baked into the fractional families.
    ``intervals`` holds (left, right, height) triples for indicator unions;
    step kernels carry ``coefficients`` on cells of width ``cell_width``
    starting at index ``start_index``.
    """

    family: str
    d: float | None = None
    delta: float = 1.0
    coefficients: tuple[float, ...] | None = None
    start_index: int = 0
    cell_width: float | None = None
    intervals: tuple[tuple[float, float, float], ...] | None = None

    def __post_init__(self) -> None:
        if self.family not in _FAMILIES:
            raise ConfigError(f"unknown kernel family {self.family!r}")
        if self.family in _FRACTIONAL:
            if self.d is None or not 0.0 < self.d < 0.5:
                raise ConfigError("fractional kernels need d in (0, 1/2)")
            if self.delta <= 0:
                raise ConfigError("fractional kernels need delta > 0")
        if self.family == "step":
            if not self.coefficients or self.cell_width is None or self.cell_width <= 0:
                raise ConfigError("step kernels need coefficients and cell_width > 0")
            if not any(c != 0.0 for c in self.coefficients):
                raise ConfigError("step kernel must not vanish identically")
        if self.family == "indicator":
            iv = self.intervals
            if not iv:
                raise ConfigError("indicator kernels need at least one interval")
            ordered = sorted(iv)
            for a, b, h in ordered:
                if b <= a:
                    raise ConfigError("indicator intervals need right > left")
                if h == 0.0:
                    raise ConfigError("indicator heights must be nonzero")
            for (_, b0, _), (a1, _, _) in zip(ordered, ordered[1:]):
                if a1 < b0 - 1e-12:
                    raise ConfigError("indicator intervals must be disjoint")


def fractional_plus(d: float, delta: float = 1.0) -> KernelSpec:
    return KernelSpec(family="fractional_plus", d=float(d), delta=float(delta))


def fractional_abs(d: float, delta: float = 1.0) -> KernelSpec:
    return KernelSpec(family="fractional_abs", d=float(d), delta=float(delta))


def differenced_fractional_plus(d: float, delta: float = 1.0) -> KernelSpec:
    return KernelSpec(
        family="differenced_fractional_plus", d=float(d), delta=float(delta)
    )


def step_kernel(
    coefficients, cell_width: float, start_index: int = 0
) -> KernelSpec:
    return KernelSpec(
        family="step",
        coefficients=tuple(float(c) for c in coefficients),
        cell_width=float(cell_width),
        start_index=int(start_index),
    )


def indicator_union(intervals) -> KernelSpec:
    return KernelSpec(
        family="indicator",
        intervals=tuple((float(a), float(b), float(h)) for a, b, h in intervals),
    )


def counterexample_kernel() -> KernelSpec:
    return KernelSpec(family="counterexample")


# --------------------------------------------------------------------------
# Pointwise evaluation
# --------------------------------------------------------------------------


def _cells(spec: KernelSpec) -> tuple[np.ndarray, np.ndarray]:
    """Edges and values of a piecewise-constant kernel, value on (e_i, e_i+1]."""
    if spec.family == "step":
        eps = spec.cell_width
        i0 = spec.start_index
        edges = eps * np.arange(i0, i0 + len(spec.coefficients) + 1, dtype=float)
        values = np.asarray(spec.coefficients, dtype=float)
    else:
        iv = sorted(spec.intervals)
        edges_list: list[float] = [iv[0][0]]
        values_list: list[float] = []
        for a, b, h in iv:
            if a > edges_list[-1] + 1e-12:  # gap between intervals
                edges_list.append(a)
                values_list.append(0.0)
            edges_list.append(b)
            values_list.append(h)
        edges = np.asarray(edges_list)
        values = np.asarray(values_list)
    return edges, values


def _piecewise_eval(edges: np.ndarray, values: np.ndarray, s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    idx = np.searchsorted(edges, s, side="left")
    inside = (idx >= 1) & (idx <= len(values))
    out = np.zeros_like(s)
    out[inside] = values[np.clip(idx - 1, 0, len(values) - 1)][inside]
    return out


def _counterexample_coeffs(n: int) -> np.ndarray:
    """c_j = (2j-1)!! / (2^j j!) for j = 0..n, the Taylor weights of (1-u)^(-1/2)."""
    j = np.arange(1, n + 1, dtype=float)
    return np.concatenate(([1.0], np.cumprod((2.0 * j - 1.0) / (2.0 * j))))


def _unit_eval(family: str, d: float, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if family == "fractional_plus":
        val = np.maximum(y, 0.0) ** d - np.maximum(y - 1.0, 0.0) ** d
        return val / math.gamma(d + 1.0)
    if family == "fractional_abs":
        return np.abs(y) ** d - np.abs(y - 1.0) ** d
    val = (
        np.maximum(y, 0.0) ** d
        - 2.0 * np.maximum(y - 1.0, 0.0) ** d
        + np.maximum(y - 2.0, 0.0) ** d
    )
    return val / math.gamma(d + 1.0)


def eval_kernel(spec: KernelSpec, s) -> np.ndarray | float:
    """Pointwise kernel value f(s); accepts scalars or arrays."""
    scalar = np.isscalar(s)
    s_arr = np.asarray(s, dtype=float)
    if spec.family in _FRACTIONAL:
        out = spec.delta**spec.d * _unit_eval(spec.family, spec.d, s_arr / spec.delta)
    elif spec.family in _PIECEWISE:
        edges, values = _cells(spec)
        out = _piecewise_eval(edges, values, s_arr)
    else:
        out = np.zeros_like(s_arr)
        pos = s_arr >= 0
        if np.any(pos):
            j = np.floor(s_arr[pos]).astype(int)
            c = _counterexample_coeffs(int(j.max()))
            out[pos] = c[j] * (s_arr[pos] - j) ** j
    return float(out) if scalar else out


def support(spec: KernelSpec) -> tuple[float, float]:
    """Closure of {f != 0}; infinite endpoints for the power-law families."""
    if spec.family == "fractional_plus" or spec.family == "differenced_fractional_plus":
        return (0.0, math.inf)
    if spec.family == "fractional_abs":
        return (-math.inf, math.inf)
    if spec.family == "counterexample":
        return (0.0, math.inf)
    edges, values = _cells(spec)
    nz = np.nonzero(values)[0]
    return (float(edges[nz[0]]), float(edges[nz[-1] + 1]))


def in_l1(spec: KernelSpec) -> bool:
    """Whether f is integrable (tail decay faster than 1/s)."""
    return spec.family not in ("fractional_plus", "fractional_abs")


def folded_abs_in_l2(spec: KernelSpec) -> bool:
    """Whether u -> sum_k |f(u+k*Delta)| is square integrable on a lattice cell.

    True for compactly supported kernels; false for the fractional families
    (not even integrable) and for the counterexample kernel, whose folded
    sum is exactly (1-u)^(-1/2) on the unit lattice.
    """
    return spec.family in _PIECEWISE


def is_nonnegative(spec: KernelSpec) -> bool:
    if spec.family in ("fractional_plus", "counterexample"):
        return True
    if spec.family in _PIECEWISE:
        _, values = _cells(spec)
        return bool(np.all(values >= 0))
    return False


# --------------------------------------------------------------------------
# Lattice foldings
# --------------------------------------------------------------------------

# Direct-window extent used before switching to the series tail; chosen so the
# inverse-power expansions converge with ratio <= 1/8 at the window edge.
_SERIES_MARGIN = 16.0


def _fold_window(delta_ratio: float, qmax: int) -> int:
    need = _SERIES_MARGIN * max(1.0, (qmax + 2) * delta_ratio) / delta_ratio
    return int(math.ceil(need)) + 2


def _fractional_fold(
    spec: KernelSpec,
    lattice_delta: float,
    qs: np.ndarray,
    us: np.ndarray,
    tol: float,
) -> tuple[np.ndarray, float]:
    """g_q(u) for fractional kernels on an array of offsets; returns (g, cert)."""
    d = spec.d
    scale = spec.delta
    r = lattice_delta / scale
    x = us / scale
    qmax = int(qs.max())
    family = spec.family
    if family == "differenced_fractional_plus":
        b = tails.unit_tail_coeffs("differenced", d)
    else:
        b = tails.unit_tail_coeffs(family, d)
    two_sided = family == "fractional_abs"
    K = _fold_window(r, qmax)
    for _ in range(4):
        lo = -K - 1 if two_sided else -1
        ks = np.arange(lo, K + qmax + 1)
        Y = x[None, :] + r * ks[:, None]
        F = _unit_eval(family, d, Y)
        g = np.empty((len(qs), len(us)))
        cert = 0.0
        for qi, q in enumerate(qs):
            top = K - lo + 1
            direct = np.einsum("ku,ku->u", F[:top], F[int(q) : top + int(q)])
            right, c1 = tails.fold_tail(b, d, x, q * r, r, K)
            g[qi] = direct + right
            cert = max(cert, c1)
            if two_sided:
                bl = tails.unit_tail_coeffs("fractional_abs_left", d)
                left, c2 = tails.fold_tail(bl, d, x, q * r, r, K + 1, mirrored=True)
                g[qi] += left
                cert = max(cert, c2)
        if cert <= tol:
            return scale ** (2.0 * d) * g, cert
        K *= 2
    raise NumericsError(
        f"lattice fold tail certificate {cert:.2e} above tolerance {tol:.2e}"
    )


def _piecewise_fold(
    spec: KernelSpec, lattice_delta: float, qs: np.ndarray, us: np.ndarray
) -> np.ndarray:
    edges, values = _cells(spec)
    lo, hi = edges[0], edges[-1]
    k_lo = int(math.floor((lo - us.max()) / lattice_delta)) - 1
    k_hi = int(math.ceil((hi - us.min()) / lattice_delta)) + 1
    qmax = int(qs.max())
    ks = np.arange(k_lo - qmax, k_hi + qmax + 1)
    F = _piecewise_eval(edges, values, us[None, :] + lattice_delta * ks[:, None])
    g = np.empty((len(qs), len(us)))
    for qi, q in enumerate(qs):
        q = int(q)
        if q == 0:
            g[qi] = np.einsum("ku,ku->u", F, F)
        else:
            g[qi] = np.einsum("ku,ku->u", F[:-q], F[q:])
    return g


def _counterexample_fold_scalar(q: int, u: float, tol: float) -> float:
    """sum_j c_j c_{j+q} u^{2j+q} on the unit lattice; geometric in u^2."""
    if u >= 1.0 - 1e-12:
        raise NumericsError(
            "counterexample folding has no summable envelope at u = 1"
        )
    total = 0.0
    block = 4096
    j0 = 0
    while True:
        j = np.arange(j0, j0 + block)
        c = _counterexample_coeffs(j0 + block + q)
        terms = c[j] * c[j + q] * u ** (2 * j + q)
        total += float(terms.sum())
        # envelope: c_j c_{j+q} <= 1, remaining tail below u^(2j)/(1-u^2)
        bound = u ** (2 * (j0 + block) + q) / (1.0 - u * u)
        if bound < tol:
            return total
        j0 += block
        if j0 > 5_000_000:
            raise NumericsError("counterexample folding did not converge in budget")


def lattice_fold(
    spec: KernelSpec, delta: float, q: int, u: float, tol: float = 1e-10
) -> float:
    """Folded kernel product g_q(u) = sum_k f(u+k*Delta) f(u+(k+q)*Delta).

    Exact finite sum for compactly supported kernels; direct window plus
    certified series tail for the fractional families.
    """
    if delta <= 0:
        raise ConfigError("delta must be > 0")
    if tol <= 0:
        raise ConfigError("tol must be > 0")
    if not -1e-9 <= u <= delta + 1e-9:
        raise ConfigError("u must lie in [0, delta]")
    q = abs(int(q))
    if spec.family in _PIECEWISE:
        out = _piecewise_fold(spec, delta, np.array([q]), np.array([float(u)]))
        return float(out[0, 0])
    if spec.family in _FRACTIONAL:
        out, _ = _fractional_fold(
            spec, delta, np.array([q]), np.array([float(u)]), tol
        )
        return float(out[0, 0])
    if abs(delta - 1.0) > 1e-12:
        raise NumericsError(
            "counterexample kernel folds have a summable envelope only on the unit lattice"
        )
    return _counterexample_fold_scalar(q, float(u), tol)


def lattice_abs_sum(
    spec: KernelSpec, delta: float, u: float, tol: float = 1e-10
) -> float:
    """Folded absolute sum F(u) = sum_k |f(u + k*Delta)|.

    Returns ``inf`` when the sum provably diverges (kernels outside L1, or
    the counterexample kernel at u = Delta = 1).
    """
    if delta <= 0:
        raise ConfigError("delta must be > 0")
    if not -1e-9 <= u <= delta + 1e-9:
        raise ConfigError("u must lie in [0, delta]")
    if spec.family in ("fractional_plus", "fractional_abs"):
        return math.inf
    if spec.family == "differenced_fractional_plus":
        # |f| decays like s^(d-2); direct window plus an envelope bound.
        d, scale = spec.d, spec.delta
        r = delta / scale
        x = u / scale
        K = max(64, int(math.ceil(64.0 / r)))
        ks = np.arange(-1, K + 1)
        vals = np.abs(_unit_eval("differenced_fractional_plus", d, x + r * ks))
        env_c = d * (1.0 - d) / math.gamma(d + 1.0)
        y0 = x + r * (K + 1) - 2.0
        tail = env_c * y0 ** (d - 1.0) / ((1.0 - d) * r)
        return scale**d * float(vals.sum() + tail)
    if spec.family in _PIECEWISE:
        edges, values = _cells(spec)
        lo, hi = edges[0], edges[-1]
        ks = np.arange(
            int(math.floor((lo - u) / delta)) - 1,
            int(math.ceil((hi - u) / delta)) + 2,
        )
        return float(np.abs(_piecewise_eval(edges, values, u + delta * ks)).sum())
    if abs(delta - 1.0) > 1e-12:
        raise NumericsError(
            "counterexample kernel folds have a summable envelope only on the unit lattice"
        )
    if u >= 1.0 - 1e-12:
        return math.inf
    # sum_j c_j u^j = (1-u)^(-1/2), summed until the geometric envelope clears tol
    total, j0, block = 0.0, 0, 4096
    while True:
        c = _counterexample_coeffs(j0 + block)
        j = np.arange(j0, j0 + block)
        total += float((c[j] * u**j).sum())
        if u ** (j0 + block) / (1.0 - u) < tol:
            return total
        j0 += block


# --------------------------------------------------------------------------
# Theoretical autocovariance
# --------------------------------------------------------------------------


@dataclass
class AcfModel:
    """Theoretical autocovariance/autocorrelation table at lattice lags."""

    delta: float
    sigma2: float
    gamma: np.ndarray
    rho: np.ndarray
    method: str
    quad_error: float
    truncation: dict = field(default_factory=dict)


def _overlap_gamma(spec: KernelSpec, t: float) -> float:
    """Exact int f(u) f(u+t) du for piecewise-constant kernels."""
    edges, values = _cells(spec)
    total = 0.0
    for i in range(len(values)):
        if values[i] == 0.0:
            continue
        for j in range(len(values)):
            if values[j] == 0.0:
                continue
            lo = max(edges[i], edges[j] - t)
            hi = min(edges[i + 1], edges[j + 1] - t)
            if hi > lo:
                total += values[i] * values[j] * (hi - lo)
    return total


def _fractional_unit_gamma(
    family: str, d: float, tau: float, tol: float
) -> tuple[float, float]:
    """int f1(u) f1(u+tau) du for the unit-scale kernel, tau >= 0."""
    b = tails.unit_tail_coeffs(
        "differenced" if family == "differenced_fractional_plus" else family, d
    )
    kinks = [0.0, 1.0]
    if family == "differenced_fractional_plus":
        kinks.append(2.0)
    T0 = max(64.0, 8.0 * (tau + 2.0))
    pts = sorted({p for p in kinks + [k - tau for k in kinks] if 0.0 < p < T0})

    def integrand(u: float) -> float:
        return float(
            _unit_eval(family, d, u) * _unit_eval(family, d, u + tau)
        )

    total = 0.0
    err = 0.0
    if family == "fractional_abs":
        pts_full = sorted({p for p in pts + [-p for p in pts] if -T0 < p < T0})
        val, e = quad(integrand, -T0, T0, points=pts_full, limit=400, epsabs=tol / 8, epsrel=1e-12)
        total += val
        err += e
        left, cl = tails.pair_integral_tail(
            tails.unit_tail_coeffs("fractional_abs_left", d), d, -tau, T0
        )
        total += left
        err += cl
    else:
        val, e = quad(integrand, 0.0, T0, points=pts, limit=400, epsabs=tol / 8, epsrel=1e-12)
        total += val
        err += e
    right, cr = tails.pair_integral_tail(b, d, tau, T0)
    return total + right, err + cr


def _counterexample_gamma(h: int, tol: float = 1e-12) -> float:
    """int f f(.+h) for the counterexample kernel at integer lags.

    On [j, j+1) the product is c_j c_{j+h} x^(2j+h), so the integral is the
    series sum_j c_j c_{j+h} / (2j+h+1); terms decay like j^-2.
    """
    del tol  # fixed direct block with an explicit leading tail correction
    J = 200_000
    c = _counterexample_coeffs(J + h)
    j = np.arange(0, J)
    val = float((c[j] * c[j + h] / (2.0 * j + h + 1.0)).sum())
    # c_j ~ (pi j)^(-1/2): tail ~ sum 1/(2 pi j^2) = 1/(2 pi J)
    val += 1.0 / (2.0 * math.pi * J)
    return val


def gamma_f(spec: KernelSpec, t: float, tol: float = 1e-10) -> tuple[float, float]:
    """Driver-free autocovariance integral int f(u) f(u+t) du with error bound."""
    t = abs(float(t))
    if spec.family in _PIECEWISE:
        return _overlap_gamma(spec, t), 0.0
    if spec.family in _FRACTIONAL:
        d, scale = spec.d, spec.delta
        val, err = _fractional_unit_gamma(spec.family, d, t / scale, tol)
        s = scale ** (2.0 * d + 1.0)
        return s * val, s * err
    if abs(t - round(t)) > 1e-9:
        raise NumericsError("counterexample autocovariance available at integer lags only")
    return _counterexample_gamma(int(round(t))), 1e-10


def autocov_quadrature(
    spec: KernelSpec,
    sigma2: float,
    delta: float,
    max_lag: int,
    tol: float = 1e-9,
) -> AcfModel:
    """Theoretical gamma(h*Delta) = sigma2 * int f(-s) f(h*Delta - s) ds.

    Compactly supported kernels are integrated exactly cell by cell; the
    power-law families use adaptive quadrature split at the kernel kinks
    plus a certified series tail.
    """
    if max_lag < 0:
        raise ConfigError("max_lag must be >= 0")
    if sigma2 <= 0:
        raise ConfigError("sigma2 must be > 0")
    if delta <= 0:
        raise ConfigError("delta must be > 0")
    gam = np.empty(max_lag + 1)
    err = 0.0
    for h in range(max_lag + 1):
        v, e = gamma_f(spec, h * delta, tol)
        gam[h] = sigma2 * v
        err = max(err, sigma2 * e)
    if err > tol:
        raise NumericsError(f"quadrature error {err:.2e} above tolerance {tol:.2e}")
    if gam[0] <= 0:
        raise NumericsError("gamma(0) <= 0; kernel vanishes almost everywhere")
    return AcfModel(
        delta=delta,
        sigma2=sigma2,
        gamma=gam,
        rho=gam / gam[0],
        method="quadrature",
        quad_error=err,
    )


def autocov_fractional_closed(d: float, scale: float, h: int) -> float:
    """Closed-form fractional-noise autocovariance shape at integer lag h.

    Returns (scale/2) * (|h+1|^(2d+1) - 2|h|^(2d+1) + |h-1|^(2d+1)); the
    multiplicative constant tying the shape to a particular kernel and
    driver is carried by ``scale``.
    """
    if not 0.0 < d < 0.5:
        raise ConfigError("d must be in (0, 1/2)")
    e = 2.0 * d + 1.0
    h = abs(int(h))
    return 0.5 * scale * (
        abs(h + 1.0) ** e - 2.0 * abs(h) ** e + abs(h - 1.0) ** e
    )


def fractional_rho(d: float, h, differenced: bool = False) -> np.ndarray | float:
    """Autocorrelation shape of fractional noise, or of its first difference.

    Valid at real lags as well as integers; rho(0) = 1, and at lag 1 equals
    2^(2d) - 1 for the noise and phi(d) for the differenced noise.
    """
    if not 0.0 < d < 0.5:
        raise ConfigError("d must be in (0, 1/2)")
    scalar = np.isscalar(h)
    h = np.abs(np.asarray(h, dtype=float))
    e = 2.0 * d + 1.0
    if not differenced:
        out = 0.5 * (np.abs(h + 1) ** e - 2.0 * h**e + np.abs(h - 1) ** e)
    else:
        num = (
            -np.abs(h + 2) ** e
            + 4.0 * np.abs(h + 1) ** e
            - 6.0 * h**e
            + 4.0 * np.abs(h - 1) ** e
            - np.abs(h - 2) ** e
        )
        out = num / (8.0 - 2.0 ** (2.0 * d + 2.0))
    return float(out) if scalar else out


# --------------------------------------------------------------------------
# Fold tables (quadrature grids over one lattice cell)
# --------------------------------------------------------------------------


@dataclass
class FoldTable:
    """g_q sampled on an integration grid over [0, Delta].

    For piecewise-constant kernels the nodes are cell midpoints of the exact
    breakpoint refinement and products integrate exactly; for fractional
    kernels the grid is Gauss-Legendre with panels graded into both
    endpoints, where g has power kinks.
    """

    delta: float
    nodes: np.ndarray
    weights: np.ndarray
    g: np.ndarray  # (max_q + 1, n_nodes)
    cert: float = 0.0

    def integral(self, q: int) -> float:
        return float(self.weights @ self.g[q])

    def integral_pair(self, p: int, q: int) -> float:
        return float(self.weights @ (self.g[p] * self.g[q]))


def _breakpoint_grid(spec: KernelSpec, delta: float) -> tuple[np.ndarray, np.ndarray]:
    edges, _ = _cells(spec)
    pts = {0.0, float(delta)}
    for e in edges:
        k_lo = math.floor((e - delta) / delta)
        for k in range(k_lo - 1, k_lo + 4):
            u = e - k * delta
            if 0.0 < u < delta:
                pts.add(float(u))
    cuts = np.array(sorted(pts))
    cuts = cuts[np.concatenate(([True], np.diff(cuts) > 1e-12))]
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    widths = np.diff(cuts)
    return mids, widths


def _graded_gauss_grid(
    delta: float, levels: int = 16, order: int = 16
) -> tuple[np.ndarray, np.ndarray]:
    xg, wg = np.polynomial.legendre.leggauss(order)
    fracs = [0.0] + [2.0**-l for l in range(levels, 0, -1)]
    cuts = sorted({delta * f for f in fracs} | {delta * (1.0 - f) for f in fracs})
    nodes, weights = [], []
    for a, b in zip(cuts, cuts[1:]):
        half = 0.5 * (b - a)
        nodes.append(0.5 * (a + b) + half * xg)
        weights.append(half * wg)
    return np.concatenate(nodes), np.concatenate(weights)


def fold_table(
    spec: KernelSpec, delta: float, max_q: int, tol: float = 1e-10
) -> FoldTable:
    """Tabulate g_0 .. g_max_q over [0, Delta] for integration."""
    if max_q < 0:
        raise ConfigError("max_q must be >= 0")
    qs = np.arange(max_q + 1)
    if spec.family in _PIECEWISE:
        nodes, weights = _breakpoint_grid(spec, delta)
        g = _piecewise_fold(spec, delta, qs, nodes)
        return FoldTable(delta=delta, nodes=nodes, weights=weights, g=g)
    if spec.family in _FRACTIONAL:
        nodes, weights = _graded_gauss_grid(delta)
        g, cert = _fractional_fold(spec, delta, qs, nodes, tol)
        return FoldTable(delta=delta, nodes=nodes, weights=weights, g=g, cert=cert)
    raise NumericsError(
        "no certified folding table for the counterexample kernel"
    )


# --------------------------------------------------------------------------
# Norm integrals (used by the fourth-moment formula)
# --------------------------------------------------------------------------


def norm_l2_sq(spec: KernelSpec, tol: float = 1e-10) -> float:
    """int f(s)^2 ds."""
    if spec.family in _PIECEWISE:
        edges, values = _cells(spec)
        return float((values**2 * np.diff(edges)).sum())
    return gamma_f(spec, 0.0, tol)[0]


def norm_l4_sq(spec: KernelSpec, tol: float = 1e-10) -> float:
    """int f(s)^4 ds."""
    if spec.family in _PIECEWISE:
        edges, values = _cells(spec)
        return float((values**4 * np.diff(edges)).sum())
    if spec.family == "counterexample":
        J = 200_000
        c = _counterexample_coeffs(J)
        j = np.arange(J + 1, dtype=float)
        val = float((c**4 / (4.0 * j + 1.0)).sum())
        return val + 1.0 / (12.0 * math.pi**2 * J**3)
    d, scale = spec.d, spec.delta
    family = spec.family
    b = tails.unit_tail_coeffs(
        "differenced" if family == "differenced_fractional_plus" else family, d
    )
    T0 = 64.0
    kinks = [0.0, 1.0] + ([2.0] if family == "differenced_fractional_plus" else [])

    def integrand(u: float) -> float:
        return float(_unit_eval(family, d, u)) ** 4

    if family == "fractional_abs":
        val, _ = quad(
            integrand, -T0, T0, points=sorted(kinks), limit=400, epsabs=tol / 8, epsrel=1e-12
        )
        left, _ = tails.power_integral_tail(
            tails.unit_tail_coeffs("fractional_abs_left", d), d, 4, T0
        )
        val += left
    else:
        val, _ = quad(integrand, 0.0, T0, points=kinks, limit=400, epsabs=tol / 8, epsrel=1e-12)
    right, _ = tails.power_integral_tail(b, d, 4, T0)
    return scale ** (4.0 * d + 1.0) * (val + right)


# --------------------------------------------------------------------------
# Summability diagnostics
# --------------------------------------------------------------------------


def _flag(partials: list[float]) -> tuple[float, str]:
    d1 = partials[1] - partials[0]
    d2 = partials[2] - partials[1]
    scale = max(abs(p) for p in partials) + 1e-300
    if abs(d2) <= 1e-12 * scale:
        return 0.0, "converging"
    if d1 <= 0:
        return math.inf, "inconclusive"
    ratio = d2 / d1
    if ratio <= 0.90:
        return ratio, "converging"
    if ratio >= 0.98:
        return ratio, "diverging"
    return ratio, "inconclusive"


def _gamma_sequence(spec: KernelSpec, delta: float, K: int) -> np.ndarray:
    """gamma_f(h*Delta) for h = 0..K, via exact/hybrid per-family routes."""
    if spec.family in _PIECEWISE:
        lo, hi = support(spec)
        hmax = min(K, int(math.ceil((hi - lo) / delta)) + 1)
        out = np.zeros(K + 1)
        for h in range(hmax + 1):
            out[h] = _overlap_gamma(spec, h * delta)
        return out
    if spec.family in _FRACTIONAL:
        g0 = gamma_f(spec, 0.0)[0]
        hs = np.arange(K + 1, dtype=float) * delta / spec.delta
        differenced = spec.family == "differenced_fractional_plus"
        return g0 * np.asarray(fractional_rho(spec.d, hs, differenced=differenced))
    J = 60_000
    c = _counterexample_coeffs(J + K + 1)
    j = np.arange(0, J, dtype=float)
    out = np.empty(K + 1)
    cj = c[:J]
    for h in range(K + 1):
        out[h] = float((cj * c[h : h + J] / (2.0 * j + h + 1.0)).sum())
    return out


def _abs_pair_integral(spec: KernelSpec, t: float) -> float:
    """int |f(u)| |f(u+t)| du, moderate accuracy (diagnostics only)."""
    if spec.family in _PIECEWISE:
        edges, values = _cells(spec)
        total = 0.0
        for i in range(len(values)):
            for j in range(len(values)):
                lo = max(edges[i], edges[j] - t)
                hi = min(edges[i + 1], edges[j + 1] - t)
                if hi > lo:
                    total += abs(values[i] * values[j]) * (hi - lo)
        return total
    if is_nonnegative(spec):
        return gamma_f(spec, t)[0]
    d, scale = spec.d, spec.delta
    family = spec.family
    tau = t / scale
    T0 = max(64.0, 8.0 * (tau + 2.0))
    kinks = [0.0, 1.0] + ([2.0] if family == "differenced_fractional_plus" else [])
    pts = sorted({p for p in kinks + [k - tau for k in kinks] if 0.0 < p < T0})

    def integrand(u: float) -> float:
        return abs(float(_unit_eval(family, d, u) * _unit_eval(family, d, u + tau)))

    if family == "fractional_abs":
        pts_full = sorted({p for p in pts + [-p for p in pts] if -T0 < p < T0})
        val, _ = quad(integrand, -T0, T0, points=pts_full, limit=400, epsabs=1e-9)
        b = tails.unit_tail_coeffs("fractional_abs_left", d)
        val += abs(tails.pair_integral_tail(b, d, -tau, T0)[0])
    else:
        val, _ = quad(integrand, 0.0, T0, points=pts, limit=400, epsabs=1e-9)
    bt = tails.unit_tail_coeffs(
        "differenced" if family == "differenced_fractional_plus" else family, d
    )
    val += abs(tails.pair_integral_tail(bt, d, tau, T0)[0])
    return scale ** (2.0 * d + 1.0) * val


def summability_diagnostics(spec: KernelSpec, delta: float, budget_k: int) -> dict:
    """Numerical convergence heuristics for the lattice summability conditions.

    Four quantities are tracked through dyadic partial budgets and flagged
    ``converging`` / ``diverging`` / ``inconclusive`` from the ratio of
    successive block increments.  These are heuristics on partial sums, not
    proofs.

    * ``fold_square_l2``   : int_0^D ( sum_|k|<=K f(u+kD)^2 )^2 du
    * ``autocov_sq_sum``   : sum_|h|<=K gamma(h*D)^2
    * ``abs_overlap_sq_sum``: sum_|k|<=K ( int |f f(.+kD)| )^2
    * ``abs_fold_l2``      : int_0^D ( sum_|k|<=K |f(u+kD)| )^2 du
    """
    if budget_k < 1:
        raise ConfigError("budget_k must be >= 1")
    if delta <= 0:
        raise ConfigError("delta must be > 0")
    K = max(8, int(budget_k))
    checkpoints = [K // 4, K // 2, K]

    xg, wg = np.polynomial.legendre.leggauss(12)
    panels = np.linspace(0.0, delta, 9)
    nodes = np.concatenate(
        [0.5 * (a + b) + 0.5 * (b - a) * xg for a, b in zip(panels, panels[1:])]
    )
    weights = np.concatenate(
        [0.5 * (b - a) * wg for _ in (1,) for a, b in zip(panels, panels[1:])]
    )

    ks_full = np.arange(-K, K + 1)
    fvals = np.asarray(
        eval_kernel(spec, nodes[None, :] + delta * ks_full[:, None]), dtype=float
    )
    sq_partials, abs_partials = [], []
    for kp in checkpoints:
        sel = np.abs(ks_full) <= kp
        s2 = (fvals[sel] ** 2).sum(axis=0)
        s1 = np.abs(fvals[sel]).sum(axis=0)
        sq_partials.append(float(weights @ s2**2))
        abs_partials.append(float(weights @ s1**2))

    gam = _gamma_sequence(spec, delta, K)
    gam_partials = [
        float(gam[0] ** 2 + 2.0 * (gam[1 : kp + 1] ** 2).sum()) for kp in checkpoints
    ]

    if is_nonnegative(spec) or spec.family in _PIECEWISE:
        absint = np.abs(gam) if is_nonnegative(spec) else None
        if absint is None:
            lim = min(K, 512)
            absint = np.array(
                [_abs_pair_integral(spec, h * delta) for h in range(lim + 1)]
            )
    else:
        lim = min(K, 64)
        absint = np.array(
            [_abs_pair_integral(spec, h * delta) for h in range(lim + 1)]
        )
    cks = [min(kp, len(absint) - 1) for kp in checkpoints]
    abs_sq_partials = [
        float(absint[0] ** 2 + 2.0 * (absint[1 : kp + 1] ** 2).sum()) for kp in cks
    ]

    checks = {}
    for name, partials, budgets in (
        ("fold_square_l2", sq_partials, checkpoints),
        ("autocov_sq_sum", gam_partials, checkpoints),
        ("abs_overlap_sq_sum", abs_sq_partials, cks),
        ("abs_fold_l2", abs_partials, checkpoints),
    ):
        ratio, flag = _flag(partials)
        checks[name] = {
            "budgets": list(budgets),
            "partials": partials,
            "block_ratio": ratio,
            "flag": flag,
        }
    return {
        "kernel": kernel_to_json(spec),
        "delta": delta,
        "budget_k": K,
        "checks": checks,
    }


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------


def kernel_to_json(spec: KernelSpec) -> dict:
    params: dict = {}
    if spec.family in _FRACTIONAL:
        params = {"d": spec.d, "delta": spec.delta}
    elif spec.family == "step":
        params = {
            "coefficients": list(spec.coefficients),
            "cell_width": spec.cell_width,
            "start_index": spec.start_index,
        }
    elif spec.family == "indicator":
        params = {"intervals": [list(iv) for iv in spec.intervals]}
    return {"family": spec.family, "params": params}


def kernel_from_json(obj: dict) -> KernelSpec:
    try:
        family = obj["family"]
        params = obj.get("params", {})
        if family in _FRACTIONAL:
            return KernelSpec(
                family=family,
                d=float(params["d"]),
                delta=float(params.get("delta", 1.0)),
            )
        if family == "step":
            return step_kernel(
                params["coefficients"],
                params["cell_width"],
                params.get("start_index", 0),
            )
        if family == "indicator":
            return indicator_union(params["intervals"])
        if family == "counterexample":
            return counterexample_kernel()
        raise ConfigError(f"unknown kernel family {family!r}")
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed kernel spec: {exc}") from exc


def write_acf_csv(model: AcfModel, path, closed_form: np.ndarray | None = None) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["lag", "gamma", "rho"]
        if closed_form is not None:
            header.append("rho_closed_form")
        writer.writerow(header)
        for h in range(len(model.gamma)):
            row = [h, repr(float(model.gamma[h])), repr(float(model.rho[h]))]
            if closed_form is not None:
                row.append(repr(float(closed_form[h])))
            writer.writerow(row)


def read_acf_csv(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out: dict = {"lag": [], "gamma": [], "rho": []}
    if rows and "rho_closed_form" in rows[0]:
        out["rho_closed_form"] = []
    for row in rows:
        out["lag"].append(int(row["lag"]))
        out["gamma"].append(float(row["gamma"]))
        out["rho"].append(float(row["rho"]))
        if "rho_closed_form" in out:
            out["rho_closed_form"].append(float(row["rho_closed_form"]))
    return out
