"""Single-site disorder catalog: sampling, density, and empirical probes.

Four families spanning the regularity/moment parameter space:

==================  =====================================  =======  =========
family              density                                alpha    q-moments
==================  =====================================  =======  =========
uniform(a, b)       1/(b-a) on [a, b]                      1        all
gaussian(m, s)      normal pdf                             1        all
power_regular(α)    (α/2)|v|^(α-1) on [-1, 1]              α        all
heavy_tail(q0)      (q0/2)(1+|v|)^(-1-q0) on R             1        q < q0
==================  =====================================  =======  =========

power_regular draws v = sign(u)|u|^(1/α) from u uniform on (-1, 1), so the
mass of [-ε, ε] is exactly ε^α.  "All q" is encoded as the finite sentinel
Q_UNBOUNDED so exponent formulas stay in ordinary float arithmetic.

Each draw consumes a fixed number of stream words (uniform, power_regular,
heavy_tail: 1; gaussian: 2 via the rejection-free trigonometric Box-Muller
form), which is what makes indexed per-sample seeding reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .rng import Stream

Q_UNBOUNDED = 1.0e12  # stands in for "every moment is finite"

FAMILIES = ("uniform", "gaussian", "power_regular", "heavy_tail")


@dataclass(frozen=True)
class DisorderSpec:
    family: str
    params: tuple
    declared_alpha: float
    declared_q: float  # moments are finite for q < declared_q

    def describe(self) -> str:
        p = ",".join(repr(float(x)) for x in self.params)
        return f"{self.family}({p})"


def make_spec(family: str, params) -> DisorderSpec:
    """Validate parameters and fill the declared regularity/moment exponents."""
    params = tuple(float(p) for p in params)
    if family == "uniform":
        if len(params) != 2 or not params[0] < params[1]:
            raise ConfigurationError(f"uniform needs a < b, got {params}")
        return DisorderSpec(family, params, 1.0, Q_UNBOUNDED)
    if family == "gaussian":
        if len(params) != 2 or params[1] <= 0:
            raise ConfigurationError(f"gaussian needs (mean, sigma>0), got {params}")
        return DisorderSpec(family, params, 1.0, Q_UNBOUNDED)
    if family == "power_regular":
        if len(params) != 1 or not 0 < params[0] <= 1:
            raise ConfigurationError(f"power_regular needs alpha in (0,1], got {params}")
        return DisorderSpec(family, params, params[0], Q_UNBOUNDED)
    if family == "heavy_tail":
        if len(params) != 1 or params[0] <= 0:
            raise ConfigurationError(f"heavy_tail needs q0 > 0, got {params}")
        return DisorderSpec(family, params, 1.0, params[0])
    raise ConfigurationError(f"unknown disorder family {family!r}")


def words_per_draw(spec: DisorderSpec) -> int:
    return 2 if spec.family == "gaussian" else 1


def sample_vector(spec: DisorderSpec, stream: Stream, n: int) -> np.ndarray:
    """n i.i.d. draws from the spec, consuming exactly n * words_per_draw words."""
    if spec.family == "uniform":
        a, b = spec.params
        return a + (b - a) * stream.uniforms(n)
    if spec.family == "gaussian":
        mean, sigma = spec.params
        w = stream.uniforms(2 * n)
        u1 = w[0::2]
        u2 = w[1::2]
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
        return mean + sigma * z
    if spec.family == "power_regular":
        alpha = spec.params[0]
        u = 2.0 * stream.uniforms(n) - 1.0
        return np.sign(u) * np.abs(u) ** (1.0 / alpha)
    if spec.family == "heavy_tail":
        q0 = spec.params[0]
        u = 2.0 * stream.uniforms(n) - 1.0
        return np.sign(u) * ((1.0 - np.abs(u)) ** (-1.0 / q0) - 1.0)
    raise ConfigurationError(f"unknown disorder family {spec.family!r}")


def sample(spec: DisorderSpec, stream: Stream) -> float:
    """One draw from the spec."""
    return float(sample_vector(spec, stream, 1)[0])


def density(spec: DisorderSpec, v) -> np.ndarray:
    """Pointwise density of the spec at v (vectorized)."""
    v = np.asarray(v, dtype=np.float64)
    if spec.family == "uniform":
        a, b = spec.params
        return np.where((v >= a) & (v <= b), 1.0 / (b - a), 0.0)
    if spec.family == "gaussian":
        mean, sigma = spec.params
        z = (v - mean) / sigma
        return np.exp(-0.5 * z * z) / (sigma * math.sqrt(2.0 * math.pi))
    if spec.family == "power_regular":
        alpha = spec.params[0]
        av = np.abs(v)
        with np.errstate(divide="ignore"):
            out = np.where((av <= 1.0) & (av > 0.0), 0.5 * alpha * av ** (alpha - 1.0), 0.0)
        return out
    if spec.family == "heavy_tail":
        q0 = spec.params[0]
        return 0.5 * q0 * (1.0 + np.abs(v)) ** (-1.0 - q0)
    raise ConfigurationError(f"unknown disorder family {spec.family!r}")


def support(spec: DisorderSpec):
    """(lo, hi) support interval; infinite endpoints for unbounded families."""
    if spec.family == "uniform":
        return spec.params
    if spec.family == "power_regular":
        return (-1.0, 1.0)
    return (-math.inf, math.inf)


def regularity_probe(spec, alpha, t_grid, eps_grid, n, stream) -> float:
    """Empirical sup over the grids of mass([t-eps, t+eps]) / eps^alpha.

    Estimates the regularity constant; stays bounded under eps refinement
    iff the spec really is alpha-regular.
    """
    t_grid = np.asarray(t_grid, dtype=np.float64)
    eps_grid = np.asarray(eps_grid, dtype=np.float64)
    if t_grid.size == 0 or eps_grid.size == 0:
        raise ConfigurationError("regularity_probe needs non-empty grids")
    if n < 10_000:
        raise ConfigurationError("regularity_probe needs n >= 10^4")
    draws = np.sort(sample_vector(spec, stream, n))
    best = 0.0
    for t in t_grid:
        lo = np.searchsorted(draws, t - eps_grid, side="left")
        hi = np.searchsorted(draws, t + eps_grid, side="right")
        mass = (hi - lo) / n
        best = max(best, float(np.max(mass / eps_grid**alpha)))
    return best


def moment_probe(spec: DisorderSpec, q: float, n: int, stream: Stream) -> float:
    """Empirical q-th absolute moment from n draws.

    For q >= declared_q the true moment is infinite and the estimate just
    grows erratically with n; that is expected output, not an error.
    """
    if n < 10_000:
        raise ConfigurationError("moment_probe needs n >= 10^4")
    if q == 0:
        return 1.0
    draws = sample_vector(spec, stream, n)
    return float(np.mean(np.abs(draws) ** q))
