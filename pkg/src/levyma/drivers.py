"""Levy driver families: exact cumulants and reproducible increment sampling.

Three concrete families are supported, all centered and with finite fourth
moment:

* Brownian motion with variance ``A`` per unit time,
* compound Poisson with intensity ``rate`` and centered jump sizes,
* the independent sum of the two.

For each family the second moment ``sigma2 = E L_1^2`` and the standardized
fourth moment ``eta = E L_1^4 / sigma2^2`` are available in closed form,
which is what makes simulated moments checkable against exact values.  An
increment over a span ``s`` has variance ``sigma2*s`` and fourth moment
``(eta-3)*sigma2^2*s + 3*sigma2^2*s^2``.

Randomness comes from the counter-based Philox generator keyed by
``(seed, stream)``, so parallel Monte Carlo replications can draw from
independent, reproducible streams without coordination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = [
    "JumpDist",
    "DriverSpec",
    "Cumulants",
    "brownian",
    "compound_poisson",
    "brownian_plus_compound_poisson",
    "cumulants",
    "sample_increments",
    "generator",
    "driver_to_json",
    "driver_from_json",
]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class JumpDist:
    """Centered jump-size distribution of the compound Poisson part.

    ``gaussian``: N(0, variance).
    ``two_point``: jumps ``+up`` with probability ``p_up`` and
    ``-up*p_up/(1-p_up)`` otherwise, so the mean is exactly zero.
    """

    kind: str
    variance: float = 1.0
    up: float = 1.0
    p_up: float = 0.5

    def __post_init__(self) -> None:
        if self.kind not in ("gaussian", "two_point"):
            raise ConfigError(f"unknown jump distribution {self.kind!r}")
        if self.kind == "gaussian" and self.variance < 0:
            raise ConfigError("gaussian jump variance must be >= 0")
        if self.kind == "two_point":
            if not 0.0 < self.p_up < 1.0:
                raise ConfigError("two_point jump probability must be in (0, 1)")
            if self.up <= 0:
                raise ConfigError("two_point up-jump size must be > 0")

    @property
    def down(self) -> float:
        """Magnitude of the down jump balancing the mean to zero."""
        return self.up * self.p_up / (1.0 - self.p_up)

    def moment(self, order: int) -> float:
        if self.kind == "gaussian":
            if order == 2:
                return self.variance
            if order == 4:
                return 3.0 * self.variance**2
        else:
            p, a, b = self.p_up, self.up, self.down
            if order == 2:
                return p * a**2 + (1 - p) * b**2
            if order == 4:
                return p * a**4 + (1 - p) * b**4
        raise ValueError(f"unsupported moment order {order}")


@dataclass(frozen=True)
class DriverSpec:
    """A centered Levy driver: Gaussian part plus compound Poisson part."""

    family: str
    variance: float = 0.0  # Gaussian variance per unit time
    rate: float = 0.0  # Poisson jump intensity
    jumps: JumpDist | None = None

    def __post_init__(self) -> None:
        if self.family not in (
            "brownian",
            "compound_poisson",
            "brownian_plus_compound_poisson",
        ):
            raise ConfigError(f"unknown driver family {self.family!r}")
        if self.variance < 0:
            raise ConfigError("Gaussian variance must be >= 0")
        has_jumps = self.family != "brownian"
        if has_jumps:
            if self.rate <= 0:
                raise ConfigError("jump intensity must be > 0")
            if self.jumps is None:
                raise ConfigError("compound Poisson driver needs a jump distribution")
        else:
            if self.rate != 0 or self.jumps is not None:
                raise ConfigError("brownian driver takes no jump parameters")
        jump_var = self.jumps.moment(2) if has_jumps and self.jumps else 0.0
        if self.variance + (self.rate * jump_var if has_jumps else 0.0) <= 0:
            raise ConfigError("driver is degenerate: E L_1^2 must be > 0")


def brownian(variance: float) -> DriverSpec:
    if variance <= 0:
        raise ConfigError("brownian driver needs variance > 0")
    return DriverSpec(family="brownian", variance=float(variance))


def compound_poisson(rate: float, jumps: JumpDist) -> DriverSpec:
    return DriverSpec(family="compound_poisson", rate=float(rate), jumps=jumps)


def brownian_plus_compound_poisson(
    variance: float, rate: float, jumps: JumpDist
) -> DriverSpec:
    return DriverSpec(
        family="brownian_plus_compound_poisson",
        variance=float(variance),
        rate=float(rate),
        jumps=jumps,
    )


@dataclass(frozen=True)
class Cumulants:
    """Exact second/fourth moment structure of the driver at unit time."""

    sigma2: float
    eta: float
    fourth_cumulant: float


def cumulants(spec: DriverSpec) -> Cumulants:
    """Closed-form cumulants: sigma2 = A + rate*E J^2, k4 = rate*E J^4."""
    if spec.family == "brownian":
        return Cumulants(sigma2=spec.variance, eta=3.0, fourth_cumulant=0.0)
    assert spec.jumps is not None
    sigma2 = spec.variance + spec.rate * spec.jumps.moment(2)
    k4 = spec.rate * spec.jumps.moment(4)
    return Cumulants(sigma2=sigma2, eta=3.0 + k4 / sigma2**2, fourth_cumulant=k4)


def generator(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for the (seed, stream) pair.

    Distinct streams under one seed are statistically independent, and the
    output is identical across runs, platforms and thread counts.
    """
    key = np.array([seed & _MASK64, stream & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _jump_sizes(jumps: JumpDist, total: int, rng: np.random.Generator) -> np.ndarray:
    if jumps.kind == "gaussian":
        return math.sqrt(jumps.variance) * rng.standard_normal(total)
    u = rng.random(total)
    return np.where(u < jumps.p_up, jumps.up, -jumps.down)


def sample_increments(
    spec: DriverSpec,
    grid_step: float,
    count: int,
    seed: int,
    stream: int = 0,
) -> np.ndarray:
    """Draw ``count`` i.i.d. increments of the driver over spans ``grid_step``.

    The draw order is fixed (Gaussian part, then Poisson counts, then jump
    sizes) so the output is bit-identical for identical arguments.
    """
    if grid_step <= 0:
        raise ConfigError("grid_step must be > 0")
    if count < 0:
        raise ConfigError("count must be >= 0")
    rng = generator(seed, stream)
    out = np.zeros(count)
    if spec.variance > 0:
        out += math.sqrt(spec.variance * grid_step) * rng.standard_normal(count)
    if spec.family != "brownian" and count > 0:
        assert spec.jumps is not None
        counts = rng.poisson(spec.rate * grid_step, count)
        total = int(counts.sum())
        if total > 0:
            sizes = _jump_sizes(spec.jumps, total, rng)
            csum = np.concatenate(([0.0], np.cumsum(sizes)))
            ends = np.cumsum(counts)
            out += csum[ends] - csum[ends - counts]
    return out


def driver_to_json(spec: DriverSpec) -> dict:
    params: dict = {}
    if spec.family in ("brownian", "brownian_plus_compound_poisson"):
        params["variance"] = spec.variance
    if spec.family != "brownian":
        assert spec.jumps is not None
        params["rate"] = spec.rate
        j: dict = {"kind": spec.jumps.kind}
        if spec.jumps.kind == "gaussian":
            j["variance"] = spec.jumps.variance
        else:
            j["up"] = spec.jumps.up
            j["p_up"] = spec.jumps.p_up
        params["jumps"] = j
    return {"family": spec.family, "params": params}


def driver_from_json(obj: dict) -> DriverSpec:
    try:
        family = obj["family"]
        params = obj.get("params", {})
        jumps = None
        if "jumps" in params:
            jobj = dict(params["jumps"])
            jumps = JumpDist(**jobj)
        return DriverSpec(
            family=family,
            variance=float(params.get("variance", 0.0)),
            rate=float(params.get("rate", 0.0)),
            jumps=jumps,
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed driver spec: {exc}") from exc
