"""Direct numerical verification of the decoupling machinery.

Covers the one-step resolvent bound, the decoupling ratio for block and
alloy potentials, the inverse-potential fractional moment, the two-sided
polynomial-ratio comparison against prod(1+|a_j|)^s / prod(1+|b_i|)^r, and
the multivariate reverse-Holder inequality for Cramer's-rule entries.

All scans are driven by per-draw derived streams, so they are deterministic
and parallelize like the Monte Carlo estimators.  Quadrature values carry
explicit error bounds; Monte Carlo cross-checks are opt-in (they are the
second, independent route and live mostly in the test suite).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .disorder import DisorderSpec, density, sample_vector, support
from .engine import run_indexed
from .errors import ConfigurationError, NumericalError
from .kernels import jacobi_eigvals, opnorm
from .model import ModelSpec, assemble, assembly_plan, potential_block, decay_exponent_window
from .numerics import resolvent_block, resolvent_profile
from .quadrature import integrate
from .rng import Stream, derive_sample_seed
from .estimators import _group_stats

_TAIL_REL = 1e-8  # target tail contribution relative to the comparability target


@dataclass(frozen=True)
class RatioIntegralSpec:
    """Integral of prod |v - a_j|^s / prod |v - b_i|^r against a catalog measure."""

    a: tuple  # complex points, length l
    b: tuple  # complex points, length m
    s: float
    r: float
    measure: DisorderSpec

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(complex(x) for x in self.a))
        object.__setattr__(self, "b", tuple(complex(x) for x in self.b))
        if self.s < 0 or self.r < 0:
            raise ConfigurationError("exponents s, r must be >= 0")
        alpha = self.measure.declared_alpha
        if self.r * len(self.b) >= alpha:
            raise ConfigurationError(
                f"r*m = {self.r * len(self.b):g} must stay below alpha = {alpha:g}"
            )

    @property
    def regime_ok(self) -> bool:
        """q >= (sl + rm) * alpha / (alpha - rm), the two-sided comparison regime."""
        alpha = self.measure.declared_alpha
        sl = self.s * len(self.a)
        rm = self.r * len(self.b)
        return self.measure.declared_q >= (sl + rm) * alpha / (alpha - rm) - 1e-12

    def target(self) -> float:
        num = math.prod((1.0 + abs(aj)) ** self.s for aj in self.a)
        den = math.prod((1.0 + abs(bi)) ** self.r for bi in self.b)
        return num / den


def _integrand(spec: RatioIntegralSpec):
    a = np.asarray(spec.a, dtype=np.complex128)
    b = np.asarray(spec.b, dtype=np.complex128)

    def f(v):
        out = density(spec.measure, v)
        for aj in a:
            out = out * np.abs(v - aj) ** spec.s
        for bi in b:
            out = out / np.abs(v - bi) ** spec.r
        return out

    return f


def _abs_moment_tail(measure: DisorderSpec, p: float, t: float) -> float:
    """Upper bound on the integral of |v|^p over {|v| > t}."""
    fam = measure.family
    if fam in ("uniform", "power_regular"):
        lo, hi = support(measure)
        return 0.0 if t >= max(abs(lo), abs(hi)) else math.inf
    if fam == "heavy_tail":
        q0 = measure.params[0]
        if q0 <= p:
            return math.inf
        return q0 * (1.0 + t) ** (p - q0) / (q0 - p)
    if fam == "gaussian":
        mean, sigma = measure.params
        if t <= abs(mean):
            return math.inf
        # Cauchy-Schwarz against a sub-Gaussian tail probability
        n2 = max(1, math.ceil(p))
        even = 2 * n2
        dfact = 1.0
        for j in range(1, even, 2):
            dfact *= j
        moment = 2.0 ** (even - 1) * (abs(mean) ** even + dfact * sigma**even) + 1.0
        prob = 2.0 * math.exp(-((t - abs(mean)) ** 2) / (2.0 * sigma * sigma))
        return math.sqrt(moment * prob)
    raise ConfigurationError(f"no closed-form density for family {fam!r}")


def _integration_domain(spec: RatioIntegralSpec):
    """(lo, hi, tail_bound) with the tail below _TAIL_REL of the target scale."""
    lo, hi = support(spec.measure)
    if math.isfinite(lo) and math.isfinite(hi):
        return lo, hi, 0.0
    sl = spec.s * len(spec.a)
    rm = spec.r * len(spec.b)
    pmax = max(
        [1.0]
        + [abs(x) for x in spec.a]
        + [abs(x) for x in spec.b]
    )
    goal = _TAIL_REL * spec.target() + 1e-300
    t = 2.0 * pmax
    for _ in range(200):
        bound = 1.5**sl * 2.0**rm * t ** (-rm) * _abs_moment_tail(spec.measure, sl, t)
        if bound <= goal:
            return -t, t, bound
        t *= 2.0
    raise NumericalError("could not truncate the measure tail (check moment assumptions)")


def ratio_integral(
    spec: RatioIntegralSpec,
    rel_tol: float = 1e-8,
    mc_draws: int = 0,
    mc_seed: int = 0,
) -> dict:
    """Adaptive quadrature of the polynomial-ratio integral.

    Panel boundaries are forced at every real singular point; unbounded
    measures are truncated where the q-moment tail bound drops below
    ~1e-8 of the comparability target (added to error_bound).  With
    mc_draws > 0 a Monte Carlo cross-check runs on the same integrand.
    """
    lo, hi, tail = _integration_domain(spec)
    sing = set()
    for pt in (*spec.a, *spec.b):
        if pt.imag == 0.0 and lo < pt.real < hi:
            sing.add(pt.real)
    if spec.measure.family == "power_regular":
        sing.add(0.0)
    f = _integrand(spec)
    with np.errstate(divide="ignore", over="ignore"):
        value, err = integrate(
            f, lo, hi, singular_points=sorted(sing), rel_tol=rel_tol
        )
    out = {"value": float(value), "error_bound": float(err + tail)}
    if mc_draws > 0:
        stream = Stream(derive_sample_seed(mc_seed, 0x51AD))
        v = sample_vector(spec.measure, stream, int(mc_draws))
        ratio = np.ones_like(v)
        for aj in spec.a:
            ratio *= np.abs(v - aj) ** spec.s
        for bi in spec.b:
            ratio /= np.abs(v - bi) ** spec.r
        out["mc_value"] = float(np.mean(ratio))
        out["mc_err"] = float(np.std(ratio, ddof=1) / math.sqrt(len(ratio)))
    return out


@dataclass(eq=False)
class _ScanCtx:
    measure: DisorderSpec
    l: int
    m: int
    s: float
    r: float
    param_scale: float
    master_seed: int
    rel_tol: float


def _complex_points(stream: Stream, count: int, scale: float) -> list:
    w = stream.uniforms(2 * count)
    radius = scale * w[0::2]
    angle = 2.0 * math.pi * w[1::2]
    return [complex(rad * math.cos(th), rad * math.sin(th)) for rad, th in zip(radius, angle)]


def _comparability_draw(ctx: _ScanCtx, idx: int) -> dict:
    stream = Stream(derive_sample_seed(ctx.master_seed, idx))
    a = _complex_points(stream, ctx.l, ctx.param_scale)
    b = _complex_points(stream, ctx.m, ctx.param_scale)
    spec = RatioIntegralSpec(a=tuple(a), b=tuple(b), s=ctx.s, r=ctx.r, measure=ctx.measure)
    res = ratio_integral(spec, rel_tol=ctx.rel_tol)
    target = spec.target()
    return {
        "a": [[p.real, p.imag] for p in a],
        "b": [[p.real, p.imag] for p in b],
        "lhs": res["value"],
        "rhs": target,
        "ratio": res["value"] / target,
        "error_bound": res["error_bound"],
    }


def comparability_scan(
    measure: DisorderSpec,
    l: int,
    m: int,
    s: float,
    r: float,
    draws: int,
    param_scale: float,
    master_seed: int,
    rel_tol: float = 1e-7,
    workers: int = 1,
    checkpoint_path=None,
) -> dict:
    """Extremes of ratio_integral / target over random points of bounded modulus.

    Both extremes must be positive and finite; their spread estimates how far
    the two-sided comparison constants are from each other.
    """
    probe = RatioIntegralSpec(
        a=(0.0,) * l, b=(0.0,) * m, s=s, r=r, measure=measure
    )
    if not probe.regime_ok:
        raise ConfigurationError("comparability regime violated: q too small for (s*l + r*m)")
    ctx = _ScanCtx(measure, int(l), int(m), float(s), float(r), float(param_scale),
                   int(master_seed), float(rel_tol))
    records = run_indexed(_comparability_draw, ctx, draws, workers, checkpoint_path)
    ratios = np.array([rec["ratio"] for rec in records])
    failures = [
        {"draw": i, **rec}
        for i, rec in enumerate(records)
        if not np.isfinite(rec["ratio"]) or rec["ratio"] <= 0.0
    ]
    return {
        "ratio_min": float(np.min(ratios)),
        "ratio_max": float(np.max(ratios)),
        "n_draws": int(draws),
        "param_scale": float(param_scale),
        "failures": failures,
        "records": records,
    }


def vinv_moment(model: ModelSpec, lam: float, s: float, samples: int, master_seed: int,
                disorder: DisorderSpec | None = None) -> dict:
    """Monte Carlo estimate of < || (v A + B - lam)^(-1) ||^s > over v.

    Draws with an exactly singular potential are redrawn (measure zero);
    near-singular draws contribute their huge but finite norm, which is the
    whole point of taking fractional powers.
    """
    if model.variant == "alloy":
        raise ConfigurationError("vinv_moment applies to block-type models")
    if not 0.0 < s < 1.0:
        raise ConfigurationError("vinv_moment needs 0 < s < 1")
    if disorder is None:
        from .disorder import make_spec

        disorder = make_spec("uniform", (-1.0, 1.0))
    stream = Stream(derive_sample_seed(master_seed, 0))
    k = model.k
    eye = np.eye(k, dtype=np.complex128)
    values = np.empty(samples)
    resamples = 0
    filled = 0
    while filled < samples:
        draws = sample_vector(disorder, stream, samples - filled)
        for v in draws:
            mat = v * model.A + model.B - lam * eye
            gram = mat.conj().T @ mat
            smin2 = float(np.min(jacobi_eigvals(gram)))
            if smin2 <= 0.0:
                resamples += 1
                if resamples > 1000:
                    raise NumericalError("vinv_moment: persistent singular potential")
                continue
            values[filled] = smin2 ** (-0.5 * s)  # ||V^-1|| = 1/sigma_min
            filled += 1
    mean, _, err = _group_stats(values[:, None])
    return {"value": float(mean[0]), "err": float(err[0]), "resamples": resamples}


@dataclass(eq=False)
class _PairCtx:
    model: ModelSpec
    topo: object
    disorder: DisorderSpec
    master_seed: int
    params: dict
    plan: object


def _one_step_sample(ctx: _PairCtx, idx: int) -> dict:
    p = ctx.params
    stream = Stream(derive_sample_seed(ctx.master_seed, idx))
    v = sample_vector(ctx.disorder, stream, ctx.topo.n_vertices)
    h = assemble(ctx.model, ctx.topo, v, ctx.plan)
    x, y, s = p["x"], p["y"], p["s"]
    z = complex(p["lam"], p["eps"])
    prof = resolvent_profile(h, p["lam"], p["eps"], x)
    k = h.k
    vy = potential_block(h, y) - z * np.eye(k, dtype=np.complex128)
    lhs = opnorm(prof[y] @ vy) ** s
    cb3 = ctx.model.constants.get("C_B3", 1.0)
    gsum = sum(opnorm(prof[zn]) ** s for zn in ctx.topo.adjacency[y])
    rhs = (cb3 * ctx.model.coupling) ** s * gsum + (1.0 if x == y else 0.0)
    return {"lhs": lhs, "rhs": rhs}


def one_step_bound_check(
    model, topo, disorder, x, y, s, lam, eps, samples, master_seed,
    workers: int = 1, checkpoint_path=None,
) -> dict:
    """One-step bound: <||G(x,y)(V(y)-z)||^s> vs the neighbor-sum majorant.

    The inequality holds per realization when s <= 1 (subadditivity of
    t^s); a failure here indicates a numerics bug, not statistics.
    """
    if not 0 < s <= 1:
        raise ConfigurationError("one_step_bound_check needs 0 < s <= 1")
    ctx = _PairCtx(
        model, topo, disorder, int(master_seed),
        {"x": int(x), "y": int(y), "s": float(s), "lam": float(lam), "eps": float(eps)},
        assembly_plan(model, topo),
    )
    payloads = run_indexed(_one_step_sample, ctx, samples, workers, checkpoint_path)
    lhs = np.array([p["lhs"] for p in payloads])
    rhs = np.array([p["rhs"] for p in payloads])
    lm, _, le = _group_stats(lhs[:, None])
    rm_, _, re_ = _group_stats(rhs[:, None])
    sigma = math.sqrt(float(le[0]) ** 2 + float(re_[0]) ** 2)
    return {
        "x": int(x),
        "y": int(y),
        "lhs": float(lm[0]),
        "rhs": float(rm_[0]),
        "sigma": sigma,
        "pass": bool(lm[0] <= rm_[0] + 3.0 * sigma),
        "pointwise_violations": int(np.sum(lhs > rhs + 1e-9 * (1.0 + np.abs(rhs)))),
    }


def _decoupling_sample(ctx: _PairCtx, idx: int) -> dict:
    p = ctx.params
    stream = Stream(derive_sample_seed(ctx.master_seed, idx))
    v = sample_vector(ctx.disorder, stream, ctx.topo.n_vertices)
    h = assemble(ctx.model, ctx.topo, v, ctx.plan)
    x, y, s, eps = p["x"], p["y"], p["s"], p["eps"]
    k = h.k
    eye = np.eye(k, dtype=np.complex128)
    nums, dens = [], []
    for lam in p["grid"]:
        z = complex(lam, eps)
        gxy = resolvent_block(h, lam, eps, x, y).block
        vy = potential_block(h, y) - z * eye
        nums.append(opnorm(gxy @ vy) ** s)
        dens.append(opnorm(gxy) ** s)
    return {"num": nums, "den": dens}


def decoupling_ratio(
    model, topo, disorder, x, y, s, lambda_grid, eps, samples, master_seed,
    workers: int = 1, checkpoint_path=None,
) -> list:
    """Per-lambda decoupling ratio <||G(V-z)||^s> / (<||G||^s> (1+|lam|)^s).

    The decoupling bound guarantees a positive floor for the ratio, not a
    specific constant; callers assert positivity and stability.
    """
    grid = [float(lam) for lam in lambda_grid]
    flags = []
    s_bound = decay_exponent_window(model.k, disorder.declared_alpha, disorder.declared_q)
    if s > s_bound + 1e-12:
        flags.append(f"s={s:g} above decoupling window {s_bound:g}")
    ctx = _PairCtx(
        model, topo, disorder, int(master_seed),
        {"x": int(x), "y": int(y), "s": float(s), "eps": float(eps), "grid": grid},
        assembly_plan(model, topo),
    )
    payloads = run_indexed(_decoupling_sample, ctx, samples, workers, checkpoint_path)
    nums = np.array([p["num"] for p in payloads])
    dens = np.array([p["den"] for p in payloads])
    out = []
    for j, lam in enumerate(grid):
        nmean, _, nerr = _group_stats(nums[:, j:j + 1])
        dmean, _, derr = _group_stats(dens[:, j:j + 1])
        scaled = float(dmean[0]) * (1.0 + abs(lam)) ** s
        entry = {
            "lambda": lam,
            "num": float(nmean[0]),
            "num_err": float(nerr[0]),
            "den": scaled,
            "den_err": float(derr[0]) * (1.0 + abs(lam)) ** s,
            "flags": list(flags),
        }
        if scaled == 0.0:
            entry["skipped"] = True
            entry["ratio"] = math.nan
        else:
            entry["skipped"] = False
            entry["ratio"] = float(nmean[0]) / scaled
        out.append(entry)
    return out


# ---------------------------------------------------------------------------
# reverse-Holder for rational functions of several disorder variables


@dataclass(eq=False)
class _RhCtx:
    measure: DisorderSpec
    s: float
    j_vars: int
    draws: int
    master_seed: int
    sampler: str
    param_scale: float


def _tridiag_green_entry(vmat, coeff_c, coeff_d, hop, z):
    """|G(0, J-1)| of a J-site chain with affine potentials, vectorized over rows.

    Uses the tridiagonal determinant recursion; the corner entry of the
    inverse is prod(hop) / det.
    """
    n_draws, j_vars = vmat.shape
    avals = coeff_c[None, :] * vmat + coeff_d[None, :] - z
    det_prev = np.ones(n_draws, dtype=np.complex128)
    det = avals[:, 0].copy()
    for jj in range(1, j_vars):
        det, det_prev = avals[:, jj] * det - (hop * hop) * det_prev, det
    with np.errstate(divide="ignore"):
        return np.abs(hop) ** (j_vars - 1) / np.abs(det)


def _rh_trial(ctx: _RhCtx, idx: int) -> dict:
    stream = Stream(derive_sample_seed(ctx.master_seed, idx))
    j_vars = ctx.j_vars
    if ctx.sampler == "poly":
        deg = 1 + int(stream.uniform() * 2)  # numerator/denominator degree 1..2
        roots_num = _complex_points(stream, deg, ctx.param_scale)
        roots_den = _complex_points(stream, deg, ctx.param_scale)
        v = sample_vector(ctx.measure, stream, ctx.draws)

        q = np.ones(ctx.draws)
        for root in roots_num:
            q = q * np.abs(v - root)
        for root in roots_den:
            q = q / np.abs(v - root)
        params = {"kind": "poly", "deg": deg}
    else:
        w = stream.uniforms(2 * j_vars + 2)
        coeff_c = 0.5 + w[:j_vars]
        coeff_d = ctx.param_scale * (2.0 * w[j_vars:2 * j_vars] - 1.0)
        hop = 0.2 + w[2 * j_vars]
        lam = 4.0 * w[2 * j_vars + 1] - 2.0
        v = sample_vector(ctx.measure, stream, ctx.draws * j_vars).reshape(ctx.draws, j_vars)
        q = _tridiag_green_entry(v, coeff_c, coeff_d, hop, complex(lam, 0.0))
        params = {"kind": "cramer", "lambda": lam, "hop": float(hop)}
    half = q ** (0.5 * ctx.s)
    m_half = float(np.mean(half))
    m_full = float(np.mean(half * half))
    ratio = m_full / (m_half * m_half) if m_half > 0 else math.inf
    return {"ratio": ratio, "m_s": m_full, "m_s2": m_half, **params}


def reverse_holder_check(
    measure: DisorderSpec,
    s: float,
    j_vars: int,
    trials: int,
    master_seed: int,
    draws: int = 20000,
    sampler: str = "cramer",
    param_scale: float = 2.0,
    workers: int = 1,
    checkpoint_path=None,
) -> dict:
    """Worst <|Q|^s> / <|Q|^{s/2}>^2 over sampled rational functions Q.

    Q is the corner Green entry of a random J-site chain (degree 1 in each
    variable) or a random univariate polynomial ratio; the inequality says
    the worst constant stays bounded.
    """
    if sampler not in ("cramer", "poly"):
        raise ConfigurationError(f"unknown reverse-Holder sampler {sampler!r}")
    if sampler == "poly" and j_vars != 1:
        raise ConfigurationError("the poly sampler is univariate")
    ctx = _RhCtx(measure, float(s), int(j_vars), int(draws), int(master_seed),
                 sampler, float(param_scale))
    records = run_indexed(_rh_trial, ctx, trials, workers, checkpoint_path)
    ratios = np.array([rec["ratio"] for rec in records])
    failures = [
        {"trial": i, **rec} for i, rec in enumerate(records) if not np.isfinite(rec["ratio"])
    ]
    return {
        "worst_constant": float(np.max(ratios[np.isfinite(ratios)])) if np.any(np.isfinite(ratios)) else math.inf,
        "n_trials": int(trials),
        "failures": failures,
        "records": records,
    }
