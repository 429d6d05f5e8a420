"""Sample statistics: mean, autocovariances, and the memory-parameter estimators.

Two autocovariance families are implemented.  The hat family subtracts the
sample mean and divides by the full sample size; the star family assumes a
zero-mean process, skips centering, and shares one effective sample size
``n = N - H`` across all lags so the vector of statistics matches the joint
normalization of the limit theorems.  Neither family clips: ``|rho| <= 1``
is an asymptotic fact, not a finite-sample one.

The memory parameter d of fractional noise is estimated from lag-1
autocorrelations: ``d_hat`` inverts ``rho(1) = 2^(2d) - 1`` directly and is
consistent for d < 1/4; ``d_tilde`` differences the series first and
inverts the strictly increasing map ``phi(d)``, which works on all of
(0, 1/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateSeriesError, EstimatorDomainError
from .simulate import SampledSeries

__all__ = [
    "EstimateSet",
    "HurstEstimate",
    "sample_mean",
    "acov_hat",
    "acov_star",
    "estimate_all",
    "phi",
    "phi_inverse",
    "hurst_dhat",
    "hurst_dtilde",
    "PHI_LOWER",
    "PHI_UPPER",
]

LOG2 = math.log(2.0)

# Range of phi on (0, 1/2): phi(0+) = -1/2; the upper limit is the 0/0 value
# of the defining ratio at d = 1/2 by l'Hopital.
PHI_LOWER = -0.5
PHI_UPPER = (18.0 * math.log(3.0) - 32.0 * LOG2) / (16.0 * LOG2)


def _values(series) -> np.ndarray:
    if isinstance(series, SampledSeries):
        return np.asarray(series.values, dtype=float)
    return np.asarray(series, dtype=float)


def sample_mean(series) -> float:
    x = _values(series)
    if len(x) == 0:
        raise ConfigError("empty series")
    return float(x.mean())


def acov_hat(series, max_lag: int) -> tuple[np.ndarray, np.ndarray]:
    """Mean-centered autocovariance with divisor n, and its correlation.

    gamma_hat(h) = n^-1 sum_{i=1..n-h} (x_i - xbar)(x_{i+h} - xbar).
    """
    x = _values(series)
    n = len(x)
    if not 0 <= max_lag < n:
        raise ConfigError("need 0 <= max_lag < n")
    xc = x - x.mean()
    gamma = np.array(
        [float(xc[: n - h] @ xc[h:]) / n for h in range(max_lag + 1)]
    )
    if gamma[0] <= 0.0:
        raise DegenerateSeriesError("zero empirical variance; correlations undefined")
    return gamma, gamma / gamma[0]


def acov_star(series, max_lag: int) -> tuple[np.ndarray, np.ndarray]:
    """Non-centered autocovariance sharing one effective size across lags.

    With N observations and H = max_lag, every lag uses
    gamma_star(h) = n^-1 sum_{i=1..n} x_i x_{i+h} with n = N - H, so the
    whole vector obeys one sqrt(n) normalization.
    """
    x = _values(series)
    N = len(x)
    if max_lag < 0 or N < max_lag + 1:
        raise ConfigError("need max_lag >= 0 and a series of length > max_lag")
    n = N - max_lag
    gamma = np.array(
        [float(x[:n] @ x[h : h + n]) / n for h in range(max_lag + 1)]
    )
    if gamma[0] <= 0.0:
        raise DegenerateSeriesError("zero second moment; correlations undefined")
    return gamma, gamma / gamma[0]


@dataclass
class EstimateSet:
    """All tracked statistics of one series at lags 0..H."""

    n: int  # effective size used by the star family
    delta: float
    mean: float
    gamma_hat: np.ndarray
    rho_hat: np.ndarray
    gamma_star: np.ndarray
    rho_star: np.ndarray


def estimate_all(series, max_lag: int) -> EstimateSet:
    x = _values(series)
    gh, rh = acov_hat(x, max_lag)
    gs, rs = acov_star(x, max_lag)
    delta = series.delta if isinstance(series, SampledSeries) else 1.0
    return EstimateSet(
        n=len(x) - max_lag,
        delta=delta,
        mean=float(x.mean()),
        gamma_hat=gh,
        rho_hat=rh,
        gamma_star=gs,
        rho_star=rs,
    )


@dataclass
class HurstEstimate:
    """Memory-parameter estimate; exactly one of d_hat/d_tilde is set."""

    d_hat: float | None
    d_tilde: float | None
    rho_used: float
    method: str

    @property
    def hurst(self) -> float:
        d = self.d_hat if self.d_hat is not None else self.d_tilde
        return d + 0.5


def phi(d: float) -> float:
    """Lag-1 autocorrelation of differenced fractional noise.

    phi(d) = (-3^(2d+1) + 4*2^(2d+1) - 7) / (8 - 2^(2d+2)), strictly
    increasing from -1/2 on (0, 1/2).
    """
    if not 0.0 < d < 0.5:
        raise ConfigError("phi is defined on (0, 1/2)")
    num = -(3.0 ** (2 * d + 1)) + 4.0 * 2.0 ** (2 * d + 1) - 7.0
    den = 8.0 - 2.0 ** (2 * d + 2)
    return num / den


def phi_inverse(y: float, tol: float = 1e-12) -> float:
    """Invert phi by bisection to |error in d| <= tol."""
    if not PHI_LOWER < y < PHI_UPPER:
        raise EstimatorDomainError(
            f"value {y:.6f} outside the range ({PHI_LOWER:.6f}, {PHI_UPPER:.6f}) of phi"
        )
    lo, hi = 1e-15, 0.5 - 1e-15
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if phi(mid) < y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def hurst_dhat(series) -> HurstEstimate:
    """d_hat = log(rho_star(1) + 1) / (2 log 2) from the raw noise."""
    _, rho = acov_star(series, 1)
    r1 = float(rho[1])
    if r1 <= -1.0:
        raise EstimatorDomainError("rho_star(1) <= -1; log argument not positive")
    return HurstEstimate(
        d_hat=math.log1p(r1) / (2.0 * LOG2),
        d_tilde=None,
        rho_used=r1,
        method="dhat",
    )


def hurst_dtilde(series) -> HurstEstimate:
    """d_tilde = phi^-1(rho_star(1)) of the differenced series."""
    x = _values(series)
    if len(x) < 3:
        raise ConfigError("need at least 3 observations to difference")
    z = np.diff(x)
    _, rho = acov_star(z, 1)
    r1 = float(rho[1])
    return HurstEstimate(
        d_hat=None,
        d_tilde=phi_inverse(r1),
        rho_used=r1,
        method="dtilde",
    )
