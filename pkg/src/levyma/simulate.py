"""Sample-path generation for lattice-observed moving averages.

The stochastic integral ``X_t = mu + int f(t-s) dL_s`` is discretized on a
fine grid of driver increments with step ``delta/m``: one shared increment
stream feeds every lattice point, so the output has the correct joint law,
and the lattice values reduce to a strided correlation of the increment
array with kernel taps.  The kernel is evaluated at the left endpoint of
each increment cell (in integration variable ``s``), which for
left-open-right-closed piecewise kernels aligned with the grid makes the
discretization exact: the sampled path is then bit-identical to the
corresponding discrete-time moving average of the same increments.

Truncation of the kernel window is certified per family.  The fractional
noise kernels have slowly decaying tails whose L2 mass cannot feasibly be
pushed below any strict tolerance, so their window grows with the sample
size instead (ratio statistics are insensitive to the common tail mass,
which nearly cancels between autocovariance lags).
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import fftconvolve

from . import kernels as kn
from . import tails
from .drivers import DriverSpec, driver_from_json, driver_to_json, sample_increments
from .errors import ConfigError
from .kernels import KernelSpec, kernel_from_json, kernel_to_json

__all__ = [
    "SimConfig",
    "SampledSeries",
    "truncation_window",
    "simulate_path",
    "simulate_fractional_pair",
    "convolve_increments",
    "write_series_csv",
    "read_series_csv",
]

# Window rule for the fractional noise kernels: delta * WINDOW_COEF * n^e with
# e = (d - 1/2)/(d - 1), clamped; grows with n so the truncation bias of the
# lag-ratio statistics stays below the discretization and sampling noise.
WINDOW_COEF = 250.0
WINDOW_MIN = 256.0
WINDOW_CAP = 1_048_576.0


@dataclass(frozen=True)
class SimConfig:
    """One simulation request; fully determines the output path."""

    kernel: KernelSpec
    driver: DriverSpec
    mu: float = 0.0
    delta: float = 1.0
    n: int = 1024
    refinement: int = 32
    truncation_t: float | None = None
    tail_tol: float = 1e-4
    seed: int = 0
    stream: int = 0

    def __post_init__(self) -> None:
        if self.delta <= 0:
            raise ConfigError("delta must be > 0")
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.refinement < 1:
            raise ConfigError("refinement must be >= 1")
        if self.tail_tol <= 0:
            raise ConfigError("tail_tol must be > 0")


@dataclass
class SampledSeries:
    """Lattice observations X_delta .. X_(n*delta) from one path."""

    delta: float
    mu: float
    values: np.ndarray
    provenance: dict


def config_to_json(config: SimConfig) -> dict:
    return {
        "kernel": kernel_to_json(config.kernel),
        "driver": driver_to_json(config.driver),
        "mu": config.mu,
        "delta": config.delta,
        "n": config.n,
        "refinement": config.refinement,
        "truncation_t": config.truncation_t,
        "tail_tol": config.tail_tol,
        "seed": config.seed,
        "stream": config.stream,
    }


def config_from_json(obj: dict) -> SimConfig:
    try:
        return SimConfig(
            kernel=kernel_from_json(obj["kernel"]),
            driver=driver_from_json(obj["driver"]),
            mu=float(obj.get("mu", 0.0)),
            delta=float(obj.get("delta", 1.0)),
            n=int(obj.get("n", 1024)),
            refinement=int(obj.get("refinement", 32)),
            truncation_t=(
                None if obj.get("truncation_t") is None else float(obj["truncation_t"])
            ),
            tail_tol=float(obj.get("tail_tol", 1e-4)),
            seed=int(obj.get("seed", 0)),
            stream=int(obj.get("stream", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed simulation config: {exc}") from exc


def _config_digest(config: SimConfig) -> str:
    blob = json.dumps(config_to_json(config), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def truncation_window(
    kernel: KernelSpec,
    tail_tol: float = 1e-4,
    n: int = 1024,
    truncation_t: float | None = None,
) -> tuple[float, float, dict]:
    """Kernel evaluation window [wlo, whi] and a tail-mass report.

    Compact kernels use their support; kernels with summable tail envelopes
    solve the envelope integral for the window; the fractional noise kernels
    use the sample-size-scaled rule (see module docstring).  An explicit
    ``truncation_t`` is validated against the family's certifiable bound.
    """
    fam = kernel.family
    if fam in ("step", "indicator"):
        lo, hi = kn.support(kernel)
        if truncation_t is not None and (truncation_t < hi or -truncation_t > lo):
            raise ConfigError("truncation window does not cover the kernel support")
        return lo, hi, {"relative_tail_mass": 0.0}

    d, scale = kernel.d, kernel.delta
    l2 = kn.norm_l2_sq(kernel)
    if fam == "differenced_fractional_plus":
        c = d * (1.0 - d) / math.gamma(d + 1.0)
        t_unit = 2.0 + (tail_tol * (l2 / scale ** (2 * d + 1)) * (3.0 - 2.0 * d) / c**2) ** (
            1.0 / (2.0 * d - 3.0)
        )
        T = scale * max(8.0, t_unit)
        if truncation_t is not None:
            mass = _fractional_tail_mass(kernel, truncation_t)
            if mass > tail_tol:
                raise ConfigError(
                    f"tail mass {mass:.2e} beyond truncation_t exceeds tail_tol {tail_tol:.2e}"
                )
            T = truncation_t
        return 0.0, T, {"relative_tail_mass": _fractional_tail_mass(kernel, T)}

    if fam in ("fractional_plus", "fractional_abs"):
        expo = (d - 0.5) / (d - 1.0)
        T = scale * min(max(WINDOW_COEF * n**expo, WINDOW_MIN), WINDOW_CAP)
        if truncation_t is not None:
            if truncation_t < 16.0 * scale:
                raise ConfigError("truncation_t too small for a fractional kernel")
            T = truncation_t
        mass = _fractional_tail_mass(kernel, T)
        lo = -T if fam == "fractional_abs" else 0.0
        return lo, T, {"relative_tail_mass": mass, "window_exponent": expo}

    # counterexample: |f| <= c_j on [j, j+1), squared tail ~ 1/(2 pi T)
    T = max(8.0, 1.0 / (2.0 * math.pi * tail_tol * l2))
    if truncation_t is not None:
        mass = 1.0 / (2.0 * math.pi * truncation_t * l2)
        if mass > tail_tol:
            raise ConfigError(
                f"tail mass {mass:.2e} beyond truncation_t exceeds tail_tol {tail_tol:.2e}"
            )
        T = truncation_t
    return 0.0, T, {"relative_tail_mass": 1.0 / (2.0 * math.pi * T * l2)}


def _fractional_tail_mass(kernel: KernelSpec, T: float) -> float:
    """L2 mass of the kernel beyond the window, relative to the full norm."""
    d, scale = kernel.d, kernel.delta
    fam = kernel.family
    b = tails.unit_tail_coeffs(
        "differenced" if fam == "differenced_fractional_plus" else fam, d
    )
    t_unit = max(T / scale, 4.0)
    mass, _ = tails.power_integral_tail(b, d, 2, t_unit)
    if fam == "fractional_abs":
        mass += tails.power_integral_tail(
            tails.unit_tail_coeffs("fractional_abs_left", d), d, 2, t_unit
        )[0]
    return mass * scale ** (2 * d + 1) / kn.norm_l2_sq(kernel)


def _taps(kernel: KernelSpec, wlo: float, whi: float, step: float) -> np.ndarray:
    n_taps = int(math.ceil((whi - wlo) / step - 1e-9)) + 1
    return np.asarray(kn.eval_kernel(kernel, whi - step * np.arange(n_taps)))


def _strided_correlate(z: np.ndarray, taps: np.ndarray, m: int, n: int, how: str):
    if how == "auto":
        how = "fft" if len(taps) >= 64 and len(z) * len(taps) > 5_000_000 else "direct"
    if how == "direct":
        full = np.correlate(z, taps, mode="valid")
    elif how == "fft":
        full = fftconvolve(z, taps[::-1], mode="valid")
    else:
        raise ConfigError(f"unknown convolution method {how!r}")
    return full[:: m][:n]


def convolve_increments(
    kernel: KernelSpec,
    delta: float,
    n: int,
    refinement: int,
    wlo: float,
    whi: float,
    increments: np.ndarray,
    mu: float = 0.0,
    convolution: str = "auto",
) -> np.ndarray:
    """Lattice samples from a given increment stream (exposed for oracles).

    The stream must hold ``(n-1)*refinement + n_taps`` increments covering
    ``[delta - whi, n*delta - wlo]`` with step ``delta/refinement``.
    """
    step = delta / refinement
    taps = _taps(kernel, wlo, whi, step)
    need = (n - 1) * refinement + len(taps)
    if len(increments) != need:
        raise ConfigError(f"expected {need} increments, got {len(increments)}")
    return mu + _strided_correlate(increments, taps, refinement, n, convolution)


def simulate_path(config: SimConfig, convolution: str = "auto") -> SampledSeries:
    """Simulate X_delta .. X_(n*delta) on one shared fine-grid increment path."""
    wlo, whi, wreport = truncation_window(
        config.kernel, config.tail_tol, config.n, config.truncation_t
    )
    step = config.delta / config.refinement
    taps = _taps(config.kernel, wlo, whi, step)
    count = (config.n - 1) * config.refinement + len(taps)
    z = sample_increments(config.driver, step, count, config.seed, config.stream)
    values = config.mu + _strided_correlate(
        z, taps, config.refinement, config.n, convolution
    )
    return SampledSeries(
        delta=config.delta,
        mu=config.mu,
        values=values,
        provenance={
            "config": config_to_json(config),
            "digest": _config_digest(config),
            "window": {"wlo": wlo, "whi": whi, **wreport},
        },
    )


def simulate_fractional_pair(
    config: SimConfig, route: str = "difference", convolution: str = "auto"
) -> tuple[SampledSeries, SampledSeries]:
    """Fractional noise and its first difference from one increment stream.

    Returns ``(noise, differenced)`` where the noise has ``n`` samples at
    lags 1..n and the differenced series has ``n-1`` samples at lags 2..n.
    ``route`` selects how the differenced series is produced: by differencing
    the simulated noise, or by convolving the same increments with the
    differenced kernel.  Both routes are algebraically identical and must
    agree to floating-point reassociation error.
    """
    base = config.kernel
    if base.family == "differenced_fractional_plus":
        base = kn.fractional_plus(base.d, base.delta)
    if base.family not in ("fractional_plus", "fractional_abs"):
        raise ConfigError("simulate_fractional_pair needs a fractional kernel")
    if abs(config.delta - base.delta) > 1e-12:
        raise ConfigError(
            "fractional pair simulation needs lattice delta equal to the kernel delta"
        )
    if route not in ("difference", "kernel"):
        raise ConfigError(f"unknown route {route!r}")

    cfg = replace(config, kernel=base)
    wlo, whi, wreport = truncation_window(
        base, cfg.tail_tol, cfg.n, cfg.truncation_t
    )
    m = cfg.refinement
    step = cfg.delta / m
    taps = _taps(base, wlo, whi, step)
    count = (cfg.n - 1) * m + len(taps)
    z = sample_increments(cfg.driver, step, count, cfg.seed, cfg.stream)
    noise_values = cfg.mu + _strided_correlate(z, taps, m, cfg.n, convolution)

    if route == "difference":
        diff_values = noise_values[1:] - noise_values[:-1]
    else:
        # taps of the truncated differenced kernel: c~_l = c_(l-m) - c_l
        taps_diff = np.concatenate((np.zeros(m), taps)) - np.concatenate(
            (taps, np.zeros(m))
        )
        diff_values = _strided_correlate(z, taps_diff, m, cfg.n - 1, convolution)

    prov = {
        "config": config_to_json(cfg),
        "digest": _config_digest(cfg),
        "window": {"wlo": wlo, "whi": whi, **wreport},
        "route": route,
    }
    noise = SampledSeries(
        delta=cfg.delta, mu=cfg.mu, values=noise_values, provenance=prov
    )
    differenced = SampledSeries(
        delta=cfg.delta,
        mu=0.0,
        values=diff_values,
        provenance={**prov, "differenced": True},
    )
    return noise, differenced


def write_series_csv(series: SampledSeries, path) -> None:
    """CSV of (index, value) plus a JSON sidecar with the config digest."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "value"])
        for i, v in enumerate(series.values, start=1):
            writer.writerow([i, repr(float(v))])
    meta = {
        "delta": series.delta,
        "mu": series.mu,
        "provenance": series.provenance,
    }
    with open(f"{path}.meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)


def read_series_csv(path) -> SampledSeries:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    values = np.array([float(r["value"]) for r in rows])
    try:
        with open(f"{path}.meta.json") as fh:
            meta = json.load(fh)
        return SampledSeries(
            delta=float(meta["delta"]),
            mu=float(meta["mu"]),
            values=values,
            provenance=meta.get("provenance", {}),
        )
    except FileNotFoundError:
        return SampledSeries(delta=1.0, mu=0.0, values=values, provenance={})
