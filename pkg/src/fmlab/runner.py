"""Experiment orchestration: config parsing, dispatch, artifact emission.

Config files are JSON with a twist: real-valued fields are written as
strings ("1e-3", "1/3", "inf") or integers, never as JSON floats, so the
canonical form (sorted keys, compact separators) hashes identically on every
platform.  The digest excludes the volatile fields "workers" and "out",
which cannot influence results.

Timing and environment stamps go to run_meta.json; results.json and
series.csv are byte-deterministic functions of (config, master_seed).
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field
from fractions import Fraction
from hashlib import sha256

import numpy as np

from . import disorder as disorder_mod
from . import estimators as est
from . import inequalities as ineq
from . import kernels
from .errors import ConfigurationError
from .model import alloy_model, singular_covering_model, block_model, spencer_model
from .rng import Stream, derive_sample_seed
from .topology import make_lattice_box

KINDS = ("decay", "wegner", "ids", "correlator", "dynamical", "inequalities")

_VOLATILE_KEYS = ("workers", "out")


def parse_real(value, path: str = "value") -> float:
    """Parse a config real: int, or a string decimal / scientific / p/q / inf."""
    if isinstance(value, bool) or value is None:
        raise ConfigurationError(f"{path}: expected a number, got {value!r}")
    if isinstance(value, int):
        return float(value)
    if isinstance(value, str):
        text = value.strip()
        try:
            if "/" in text:
                return float(Fraction(text))
            return float(text)
        except (ValueError, ZeroDivisionError):
            raise ConfigurationError(f"{path}: cannot parse real {value!r}")
    raise ConfigurationError(f"{path}: reals must be strings or integers, got {value!r}")


def _reject_float(_s):
    raise ConfigurationError(
        "config contains a JSON float; write reals as strings to keep digests stable"
    )


def load_config(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh, parse_float=_reject_float)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc})")


def canonical_config_bytes(cfg: dict) -> bytes:
    trimmed = {k: v for k, v in cfg.items() if k not in _VOLATILE_KEYS}
    return json.dumps(trimmed, sort_keys=True, separators=(",", ":")).encode("utf-8")


def config_digest(cfg: dict) -> str:
    return sha256(canonical_config_bytes(cfg)).hexdigest()


def _parse_complex_matrix(rows, path: str) -> np.ndarray:
    try:
        mat = np.array(
            [[complex(parse_real(c[0], path), parse_real(c[1], path)) for c in row]
             for row in rows],
            dtype=np.complex128,
        )
    except (TypeError, IndexError):
        raise ConfigurationError(f"{path}: matrices are nested [re, im] pairs")
    return mat


def _parse_offset(key: str):
    return tuple(int(part) for part in str(key).split(","))


def build_topology(cfg: dict):
    if "topology" not in cfg:
        raise ConfigurationError("topology: section missing")
    t = cfg["topology"]
    d = int(t.get("d", len(t.get("sides", []))))
    return make_lattice_box(d, t["sides"], bool(t.get("periodic", False)))


def build_disorder(cfg: dict):
    if "disorder" not in cfg:
        raise ConfigurationError("disorder: section missing")
    d = cfg["disorder"]
    params = [parse_real(p, "disorder.params") for p in d.get("params", [])]
    return disorder_mod.make_spec(d.get("family", "uniform"), params)


def build_model(cfg: dict):
    if "model" not in cfg:
        raise ConfigurationError("model: section missing")
    m = cfg["model"]
    variant = m.get("variant", "block")
    g = parse_real(m.get("g", 1), "model.g")
    if variant == "spencer":
        return spencer_model(parse_real(m.get("a", 1), "model.a"), g)
    if variant == "singular_covering":
        return singular_covering_model(g)
    if variant == "alloy":
        coeffs = {
            _parse_offset(k): parse_real(v, f"model.coeffs[{k}]")
            for k, v in m.get("coeffs", {}).items()
        }
        return alloy_model(coeffs, g)
    if variant == "block":
        a = _parse_complex_matrix(m["A"], "model.A")
        b = _parse_complex_matrix(m["B"], "model.B")
        hopping = None
        if "hopping" in m:
            hopping = {
                _parse_offset(k): _parse_complex_matrix(v, f"model.hopping[{k}]")
                for k, v in m["hopping"].items()
            }
        return block_model(a, b, g, hopping)
    raise ConfigurationError(f"model.variant: unknown variant {variant!r}")


@dataclass(eq=False)
class ResultRecord:
    kind: str
    config_digest: str
    master_seed: int
    outputs: dict
    columns: list
    rows: list  # per-row lists matching columns
    timing: dict = field(default_factory=dict)
    environment: dict = field(default_factory=dict)

    def deterministic_dict(self) -> dict:
        return {
            "kind": self.kind,
            "config_digest": self.config_digest,
            "master_seed": self.master_seed,
            "outputs": self.outputs,
            "series": {"columns": self.columns, "rows": self.rows},
        }

    def to_json(self) -> str:
        return json.dumps(self.deterministic_dict(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ResultRecord":
        raw = json.loads(text)
        return cls(
            kind=raw["kind"],
            config_digest=raw["config_digest"],
            master_seed=raw["master_seed"],
            outputs=raw["outputs"],
            columns=raw["series"]["columns"],
            rows=raw["series"]["rows"],
        )


def _fmt_cell(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float):
        return f"{x:.16e}"  # 17 significant digits: lossless float64 round-trip
    return str(x)


def emit_csv(record: ResultRecord, path: str):
    """UTF-8 CSV with a header row; floats in 17-significant-digit scientific form."""
    lines = [",".join(record.columns)]
    for row in record.rows:
        lines.append(",".join(_fmt_cell(c) for c in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _atomic_write(path: str, text: str):
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# kind dispatch


def _estimator_cfg(cfg: dict) -> dict:
    return cfg.get("estimator", {})


def _run_decay(cfg, model, topo, dis, seed, workers, outdir):
    p = _estimator_cfg(cfg)
    eps_raw = p.get("eps", "auto")
    if eps_raw == "auto":
        eps = est.default_eps(model, topo, dis, seed)
    else:
        eps = parse_real(eps_raw, "estimator.eps")
    checkpoint = os.path.join(outdir, "samples.jsonl") if outdir else None
    profile = est.fractional_moment_profile(
        model, topo, dis,
        x0=int(p.get("x0", 0)),
        s=parse_real(p.get("s", "1/3"), "estimator.s"),
        lam=parse_real(p.get("lambda", 0), "estimator.lambda"),
        eps=eps,
        samples=int(p.get("samples", 1000)),
        master_seed=seed,
        workers=workers,
        checkpoint_path=checkpoint,
    )
    d_min = int(p.get("d_min", 1))
    fit = est.decay_rate_fit(profile, d_min=d_min)
    ok, margin = est.moment_max_check(profile)
    outputs = {
        "fit": fit,
        "d_min": d_min,
        "eps_used": eps,
        "max_at_diagonal": ok,
        "max_margin": margin,
        "resamples": profile.resamples,
        "flags": list(profile.flags),
        "estimate": profile.to_payload(),
    }
    rows = [
        [int(profile.distances[i]), float(profile.means[i]), float(profile.errs[i]),
         profile.n_samples, profile.resamples]
        for i in range(len(profile.means))
    ]
    return outputs, ["distance", "mean", "mom_err", "n", "resamples"], rows


def _run_wegner(cfg, model, topo, dis, seed, workers, outdir):
    p = _estimator_cfg(cfg)
    checkpoint = os.path.join(outdir, "samples.jsonl") if outdir else None
    we = est.wegner_exponent(
        model, topo, dis,
        lambda0=parse_real(p.get("lambda0", 0), "estimator.lambda0"),
        eps_list=[parse_real(e, "estimator.eps_list") for e in p["eps_list"]],
        samples=int(p.get("samples", 1000)),
        master_seed=seed,
        workers=workers,
        checkpoint_path=checkpoint,
    )
    outputs = {"exponent": we.exponent, "flags": list(we.flags), "estimate": we.to_payload()}
    rows = [
        [float(we.eps_list[i]), float(we.masses[i]), float(we.errs[i]), we.n_samples]
        for i in range(len(we.masses))
    ]
    return outputs, ["eps", "mass", "err", "n"], rows


def _run_ids(cfg, model, topo, dis, seed, workers, outdir):
    p = _estimator_cfg(cfg)
    bins = p.get("bins", {})
    if "edges" in bins:
        edges = np.array([parse_real(e, "estimator.bins.edges") for e in bins["edges"]])
    else:
        edges = np.linspace(
            parse_real(bins.get("lo", -3), "estimator.bins.lo"),
            parse_real(bins.get("hi", 3), "estimator.bins.hi"),
            int(bins.get("n", 64)) + 1,
        )
    checkpoint = os.path.join(outdir, "samples.jsonl") if outdir else None
    ids = est.ids_histogram(
        model, topo, dis,
        samples=int(p.get("samples", 200)),
        edges=edges,
        master_seed=seed,
        workers=workers,
        checkpoint_path=checkpoint,
    )
    outputs = {"total_mass": float(np.sum(ids.masses)), "estimate": ids.to_payload()}
    rows = [
        [float(ids.edges[i]), float(ids.edges[i + 1]), float(ids.masses[i]), float(ids.errs[i])]
        for i in range(len(ids.masses))
    ]
    return outputs, ["bin_lo", "bin_hi", "mass", "err"], rows


def _interval(p, default=(-1.0, 1.0)):
    iv = p.get("interval")
    if iv is None:
        return default
    return (parse_real(iv[0], "estimator.interval"), parse_real(iv[1], "estimator.interval"))


def _run_correlator(cfg, model, topo, dis, seed, workers, outdir):
    p = _estimator_cfg(cfg)
    checkpoint = os.path.join(outdir, "samples.jsonl") if outdir else None
    prof = est.correlator_decay_profile(
        model, topo, dis,
        interval=_interval(p),
        samples=int(p.get("samples", 500)),
        master_seed=seed,
        x0=int(p.get("x0", 0)),
        workers=workers,
        checkpoint_path=checkpoint,
    )
    d_min = int(p.get("d_min", 1))
    fit = est.decay_rate_fit(prof, d_min=d_min)
    k_bound = prof.extras["k"] + 1e-8
    outputs = {
        "fit": fit,
        "d_min": d_min,
        "max_correlator": prof.extras["max_correlator"],
        "k_bound_ok": bool(prof.extras["max_correlator"] <= k_bound),
        "estimate": prof.to_payload(),
    }
    rows = [
        [int(prof.distances[i]), float(prof.means[i]), float(prof.errs[i]), prof.n_samples]
        for i in range(len(prof.means))
    ]
    return outputs, ["distance", "mean", "err", "n"], rows


def _run_dynamical(cfg, model, topo, dis, seed, workers, outdir):
    p = _estimator_cfg(cfg)
    checkpoint = os.path.join(outdir, "samples.jsonl") if outdir else None
    prof = est.dynamical_profile(
        model, topo, dis,
        interval=_interval(p),
        samples=int(p.get("samples", 200)),
        master_seed=seed,
        x0=int(p.get("x0", 0)),
        t_points=int(p.get("t_points", est.T_GRID_POINTS)),
        workers=workers,
        checkpoint_path=checkpoint,
    )
    outputs = {
        "max_excess_over_2q": prof.extras["max_excess_over_2q"],
        "factor1_hold_fraction": prof.extras["factor1_hold_fraction"],
        "bound_ok": bool(prof.extras["max_excess_over_2q"] <= 1e-8),
        "estimate": prof.to_payload(),
    }
    rows = [
        [int(prof.distances[i]), float(prof.means[i]), float(prof.errs[i]), prof.n_samples]
        for i in range(len(prof.means))
    ]
    return outputs, ["distance", "mean", "err", "n"], rows


def _run_inequalities(cfg, model, topo, dis, seed, workers, outdir):
    p = _estimator_cfg(cfg)
    samples = int(p.get("samples", 300))
    eps = parse_real(p.get("eps", "1e-3"), "estimator.eps")
    s_step = parse_real(p.get("one_step_s", "1/3"), "estimator.one_step_s")
    pairs = int(p.get("pairs", 6))
    ck = lambda name: os.path.join(outdir, f"samples.{name}.jsonl") if outdir else None

    # random (x, y) pairs from a dedicated stream
    pair_stream = Stream(derive_sample_seed(seed, 0xA11))
    n = topo.n_vertices
    one_step = []
    for j in range(pairs):
        w = pair_stream.uniforms(2)
        x, y = int(w[0] * n), int(w[1] * n)
        one_step.append(
            ineq.one_step_bound_check(
                model, topo, dis, x, y, s_step,
                parse_real(p.get("lambda", 0), "estimator.lambda"), eps,
                samples, derive_sample_seed(seed, 1000 + j), workers,
                checkpoint_path=ck(f"one_step_{j}"),
            )
        )
    lam_grid = [parse_real(v, "estimator.lambda_grid") for v in p.get(
        "lambda_grid", ["0", "0.5", "1", "2"])]
    lem = ineq.decoupling_ratio(
        model, topo, dis, 0, min(2, n - 1),
        parse_real(p.get("decoupling_s", "0.2"), "estimator.decoupling_s"),
        lam_grid, eps, samples, derive_sample_seed(seed, 2000), workers,
        checkpoint_path=ck("decoupling"),
    )
    scan_results = {}
    scan_records = []
    for scale in p.get("scales", ["5", "10"]):
        scan = ineq.comparability_scan(
            dis,
            int(p.get("l", 3)),
            int(p.get("m", 3)),
            parse_real(p.get("s", "0.15"), "estimator.s"),
            parse_real(p.get("r", "0.15"), "estimator.r"),
            int(p.get("draws", 200)),
            parse_real(scale, "estimator.scales"),
            derive_sample_seed(seed, 3000),
            workers=workers,
            checkpoint_path=ck(f"scan_{scale}"),
        )
        scan_results[str(scale)] = {
            "ratio_min": scan["ratio_min"],
            "ratio_max": scan["ratio_max"],
            "failures": len(scan["failures"]),
        }
        scan_records = scan["records"]
    rh = ineq.reverse_holder_check(
        dis,
        parse_real(p.get("rh_s", "0.2"), "estimator.rh_s"),
        int(p.get("rh_j", 2)),
        int(p.get("rh_trials", 100)),
        derive_sample_seed(seed, 4000),
        workers=workers,
        checkpoint_path=ck("rh"),
    )
    vinv = None
    if model.variant != "alloy":
        vinv = ineq.vinv_moment(
            model, parse_real(p.get("lambda", 0), "estimator.lambda"),
            parse_real(p.get("vinv_s", "0.5"), "estimator.vinv_s"),
            max(samples, 2000), derive_sample_seed(seed, 5000), dis,
        )
    outputs = {
        "one_step": one_step,
        "one_step_all_pass": bool(all(r["pass"] for r in one_step)),
        "decoupling": lem,
        "decoupling_min_ratio": float(
            min((e["ratio"] for e in lem if not e["skipped"]), default=math.nan)
        ),
        "comparability": scan_results,
        "reverse_holder": {
            "worst_constant": rh["worst_constant"],
            "failures": len(rh["failures"]),
        },
        "vinv": vinv,
    }
    rows = [
        [i, json.dumps({"a": r["a"], "b": r["b"]}, sort_keys=True, separators=(",", ":")),
         float(r["lhs"]), float(r["rhs"]), float(r["ratio"])]
        for i, r in enumerate(scan_records)
    ]
    return outputs, ["draw", "parameters", "lhs", "rhs", "ratio"], rows


_DISPATCH = {
    "decay": _run_decay,
    "wegner": _run_wegner,
    "ids": _run_ids,
    "correlator": _run_correlator,
    "dynamical": _run_dynamical,
    "inequalities": _run_inequalities,
}


def run(cfg: dict, outdir: str | None = None) -> ResultRecord:
    """Dispatch a config to its estimator suite and return the ResultRecord.

    When outdir is given, artifacts (canonical config copy, checkpoint,
    results.json, run_meta.json) are written there and runs are resumable.
    """
    kind = cfg.get("kind")
    if kind not in KINDS:
        raise ConfigurationError(f"kind: expected one of {KINDS}, got {kind!r}")
    seed = cfg.get("master_seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigurationError("master_seed: must be an integer")
    workers = int(cfg.get("workers", 1))
    digest = config_digest(cfg)

    model = build_model(cfg)
    topo = build_topology(cfg)
    dis = build_disorder(cfg)

    if outdir:
        os.makedirs(outdir, exist_ok=True)
        _atomic_write(
            os.path.join(outdir, "config.json"),
            json.dumps(cfg, sort_keys=True, indent=1) + "\n",
        )

    started = time.time()
    outputs, columns, rows = _DISPATCH[kind](cfg, model, topo, dis, seed, workers, outdir)
    elapsed = time.time() - started

    record = ResultRecord(
        kind=kind,
        config_digest=digest,
        master_seed=seed,
        outputs=outputs,
        columns=columns,
        rows=rows,
        timing={"elapsed_seconds": elapsed, "finished_unix": time.time()},
        environment={
            "numpy": np.__version__,
            "kernel_backend": kernels.backend(),
        },
    )
    if outdir:
        _atomic_write(os.path.join(outdir, "results.json"), record.to_json())
        _atomic_write(
            os.path.join(outdir, "run_meta.json"),
            json.dumps(
                {"timing": record.timing, "environment": record.environment},
                sort_keys=True,
                indent=1,
            ) + "\n",
        )
    return record
