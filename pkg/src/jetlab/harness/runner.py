"""Mode dispatch: build the objects a config describes, run, collect tables."""
from __future__ import annotations

import json
import os
import time
import traceback
from fractions import Fraction
from pathlib import Path

import numpy as np

from ..localmodels import (PolynomialSection, approximate_primitive, approximate_top_order,
                           parametric_transverse_approximate, reduce_order,
                           transversality_adjust, transverse_approximate)
from ..polyjet.jet import jets_equal
from ..primitive import (PrimitiveSection, TopOrderSection, decompose_top_order,
                         merge_redundant, recombine)
from ..verify import diagonal_lattice, probe_holonomy, scaling_sweep
from .config import DEFAULT_GRID, ConfigError, ExperimentConfig, parse_fields, scale_grid
from .report import OutputWriter, RunManifest, environment, to_plain

OUT_ENV = "JETLAB_OUT_DIR"
EXIT_OK, EXIT_CHECKS, EXIT_ERROR = 0, 1, 2
# checks that decide the exit status; everything else is informational
STRUCTURAL = ("boundary_vanishing", "boundary_identity", "boundary_identity_frame",
              "v_invariant", "v_invariant_frame", "gluing", "c0_small", "support_band",
              "stages_ok", "boundary_z_zero", "boundary_z_identity", "holonomy_trend",
              "reconstruction")


def output_dir(cfg: ExperimentConfig, cli_out: str | None) -> Path:
    """--out beats the environment override, which beats the config."""
    if cli_out:
        return Path(cli_out)
    if os.environ.get(OUT_ENV):
        return Path(os.environ[OUT_ENV])
    return Path(cfg.get("outputs", {}).get("dir", "jetlab_out"))


def _grid(cfg, keys):
    g = dict(DEFAULT_GRID)
    g.update(cfg.get("grid", {}))
    return {k: g[k] for k in keys}


def _sigma_from(cfg):
    _, coeffs = parse_fields(cfg.raw)
    return coeffs


def _k(cfg):
    return cfg.get("k", 0 if cfg.mode == "reduce" else 1)


def _result_tables(res) -> dict:
    meas = sorted((k, v) for k, v in res.measurements.items() if np.isscalar(v))
    return {"measurements": (("name", "value"), meas),
            "checks": (("name", "passed"), sorted(res.checks.items()))}


# ----------------------------------------------------------------- modes

def run_decompose(cfg):
    m, r = cfg.get("m"), cfg.get("r")
    sigma = TopOrderSection(m, r, _sigma_from(cfg), cfg.get("n"))
    terms = decompose_top_order(sigma)
    merged = merge_redundant(terms)
    rng = np.random.default_rng(cfg.get("seed", 0))
    samples = cfg.get("samples", 8)
    exact = bool(cfg.get("exact"))
    pts = rng.integers(-20, 21, size=(samples, m))
    if exact:
        pts = np.vectorize(lambda a: Fraction(int(a), 20), otypes=[object])(pts)
    else:
        pts = pts / 20.0
    target = sigma.evaluate(pts, exact)
    checks = {"reconstruction": bool(jets_equal(recombine(terms, pts, exact), target,
                                                tol=0 if exact else 1e-12)),
              "reconstruction_merged": bool(not merged or jets_equal(
                  recombine(merged, pts, exact), target, tol=0 if exact else 1e-12))}
    rows = []
    for i, t in enumerate(merged):
        w = ";".join(f"{'.'.join(str(j + 1) for j in a)}:{c}"
                     for a, c in sorted(t.weights.items()))
        v = json.dumps(t.v.to_json(), sort_keys=True, separators=(",", ":"))
        rows.append((i, " ".join(str(int(c)) for c in t.constant_conormal), w, v))
    report = {"sigma": sigma.to_json(), "term_count": len(terms), "merged_count": len(merged),
              "terms": [t.to_json() for t in terms], "merged": [t.to_json() for t in merged],
              "exact": exact, "checks": checks}
    tables = {"terms": (("index", "conormal", "weights", "v"), rows),
              "checks": (("name", "passed"), sorted(checks.items()))}
    return report, tables, checks


def _primitive(cfg):
    return PrimitiveSection(cfg.field_, np.asarray(cfg.get("conormal"), dtype=np.float64),
                            cfg.get("r"), cfg.get("m"))


def run_adjust(cfg):
    sig = _primitive(cfg)
    res = transversality_adjust(sig, cfg.get("delta"), _k(cfg),
                                **_grid(cfg, ("per_axis", "norm_grid")))
    hol = probe_holonomy(res.sigma_hat, sig.m, _k(cfg), cfg.get("delta"))
    res.checks["holonomy_trend"] = hol.decreasing
    report = res.to_json()
    report["holonomy"] = hol.to_json()
    return report, _result_tables(res), res.checks


def run_transverse(cfg):
    m = cfg.get("m")
    sig = PrimitiveSection(cfg.field_, np.eye(m)[0], cfg.get("r"), m)
    res = transverse_approximate(sig, _k(cfg), cfg.get("eps"), cfg.get("delta"),
                                 **_grid(cfg, ("per_delta", "per_eps", "other", "norm_grid")))
    hol = probe_holonomy(res.sigma_hat, m, _k(cfg), res.params["delta"])
    res.checks["holonomy_trend"] = hol.decreasing
    report = res.to_json()
    report["holonomy"] = hol.to_json()
    return report, _result_tables(res), res.checks


def run_primitive(cfg):
    sig = _primitive(cfg)
    kw = _grid(cfg, ("per_delta", "per_eps", "other", "per_axis"))
    lam = cfg.get("lam")
    extra = {} if lam is None else {"lam": lam}
    res = approximate_primitive(sig, _k(cfg), cfg.get("eps"), cfg.get("delta"), **extra, **kw)
    d = res.params.get("delta", cfg.get("delta"))
    hol = probe_holonomy(res.sigma_hat, sig.m, _k(cfg), d)
    res.checks["holonomy_trend"] = hol.decreasing
    report = res.to_json()
    report["holonomy"] = hol.to_json()
    return report, _result_tables(res), res.checks


def run_parametric(cfg):
    m, q = cfg.get("m"), cfg.get("q")
    runs = parametric_transverse_approximate(
        cfg.field_, m, q, cfg.get("r"), _k(cfg), cfg.get("eps"), cfg.get("delta"),
        [np.asarray(z, dtype=np.float64) for z in cfg.get("z_values")],
        **_grid(cfg, ("per_delta", "per_eps", "other")))
    checks, rows, per = {}, [], []
    for z, res in runs:
        for name, ok in res.checks.items():
            checks[name] = checks.get(name, True) and bool(ok)
        zs = " ".join(repr(float(c)) for c in z)
        for key, val in sorted(res.measurements.items()):
            if np.isscalar(val):
                rows.append((zs, key, val))
        per.append({"z": z, **res.to_json()})
    report = {"runs": per, "checks": checks}
    tables = {"measurements": (("z", "name", "value"), rows),
              "checks": (("name", "passed"), sorted(checks.items()))}
    return report, tables, checks


def _poly_section(cfg):
    return PolynomialSection(cfg.get("m"), cfg.get("r"), _sigma_from(cfg), cfg.get("n"))


def _stage_deltas(stages) -> list[float]:
    out = []
    for s in stages:
        if "stages" in s:
            out += _stage_deltas(s["stages"])
        elif "delta" in s:
            out.append(s.get("params", {}).get("delta", s["delta"]))
    return out


def _orchestrated(cfg, res, target):
    deltas = _stage_deltas(res.stages)
    d = min(deltas) if deltas else cfg.get("delta", 0.005)
    hol = probe_holonomy(res.sigma_hat, cfg.get("m"), _k(cfg), d)
    res.checks["holonomy_trend"] = hol.decreasing
    report = res.to_json()
    report["holonomy"] = hol.to_json()
    return report, _result_tables(res), res.checks


def run_top_order(cfg):
    sigma = TopOrderSection(cfg.get("m"), cfg.get("r"), _sigma_from(cfg), cfg.get("n"))
    kw = _grid(cfg, ("per_delta", "per_eps", "other", "per_axis"))
    res = approximate_top_order(sigma, _k(cfg), None, cfg.get("eps", 0.1),
                                cfg.get("delta", 0.005), **kw)
    return _orchestrated(cfg, res, sigma)


def run_reduce(cfg):
    sigma = _poly_section(cfg)
    kw = _grid(cfg, ("per_delta", "per_eps", "other", "per_axis"))
    res = reduce_order(sigma, _k(cfg), cfg.get("eps", 0.1), cfg.get("delta", 0.005), **kw)
    return _orchestrated(cfg, res, sigma)


def sweep_lattice(cfg) -> list[dict]:
    lat = cfg.get("lattice")
    if "diagonal" in lat:
        d = lat["diagonal"]
        pts = diagonal_lattice(d["eps"], d["ratio"], d["steps"])
    elif "ratio" in lat:
        pts = [{"eps": e, "delta": q * e} for e in lat["eps"] for q in lat["ratio"]]
    elif "eps" in lat and "delta" in lat:
        pts = [{"eps": e, "delta": d} for e in lat["eps"] for d in lat["delta"]]
    elif "eps" in lat:
        pts = [{"eps": e, "delta": cfg.get("delta")} for e in lat["eps"]]
    else:
        pts = [{"delta": d} for d in lat["delta"]]
    if "theta" in lat:
        pts = [{**p, "theta": t} for t in lat["theta"] for p in pts]
    for p in pts:
        if p.get("delta") is None:
            raise ConfigError("$.lattice: no delta for the sweep points")
    return pts


def run_sweep(cfg):
    construction = cfg.get("construction")
    m, r = cfg.get("m"), cfg.get("r")
    sigma = None
    if cfg.field_ is not None:
        conormal = cfg.get("conormal") or list(np.eye(m)[0])
        sigma = PrimitiveSection(cfg.field_, np.asarray(conormal, dtype=np.float64), r, m)
    elif construction != "wiggle":
        raise ConfigError(f"$: construction {construction!r} needs 'field'")
    if construction == "transverse":
        rule = _grid(cfg, ("per_delta", "per_eps", "other"))
    elif construction == "adjust":
        rule = _grid(cfg, ("per_axis",))
    else:
        rule = {}
    lattice = sweep_lattice(cfg)
    if construction == "wiggle":
        lattice = [{**p, "m": m} for p in lattice]
    rep = scaling_sweep(construction, lattice, sigma, cfg.get("kinds"), rule,
                        refine=cfg.get("refine", True), workers=cfg.get("workers", 1))
    errors = [r.error for r in rep.rows if r.error]
    report = rep.to_json()
    report["errors"] = errors
    return report, {"sweep": rep.to_csv()}, {}


MODES = {"decompose": run_decompose, "adjust": run_adjust, "transverse": run_transverse,
         "parametric": run_parametric, "primitive": run_primitive, "top_order": run_top_order,
         "reduce": run_reduce, "sweep": run_sweep}


# ------------------------------------------------------------------ driver

def run_experiment(cfg: ExperimentConfig, out_dir=None, grid_scale: float | None = None):
    """Run one config and write config, report, tables and manifest.

    Returns (manifest, exit code).  The exit code reflects structural checks
    only; estimate ratios never fail a run.
    """
    if grid_scale is not None and grid_scale != 1.0:
        cfg.raw["grid"] = scale_grid(cfg.raw, grid_scale)
    out = output_dir(cfg, out_dir)
    writer = OutputWriter(out)
    man = RunManifest(cfg.mode, cfg.hash, started=RunManifest.now(),
                      environment=environment())
    writer.text("config.json", cfg.canonical() + "\n")
    t0 = time.perf_counter()
    try:
        report, tables, checks = MODES[cfg.mode](cfg)
        report = {"mode": cfg.mode, "config_hash": cfg.hash, **report}
        writer.json("report.json", report)
        for name, table in tables.items():
            if isinstance(table, str):
                writer.text(f"{name}.csv", table)
            else:
                writer.csv(f"{name}.csv", *table)
        man.checks = {k: bool(v) for k, v in checks.items()}
        failed = sorted(k for k, v in man.checks.items() if k in STRUCTURAL and not v)
        if failed:
            man.status, man.exit_code = "checks_failed", EXIT_CHECKS
            man.error = {"type": "StructuralCheckFailed", "message": ", ".join(failed)}
    except Exception as exc:  # serialized into the manifest, never swallowed silently
        man.status, man.exit_code = "error", EXIT_ERROR
        man.error = {"type": type(exc).__name__, "message": str(exc),
                     "traceback": traceback.format_exc(limit=8)}
    man.environment["seconds"] = round(time.perf_counter() - t0, 3)
    man.files = writer.files
    man.finished = RunManifest.now()
    man.write(out)
    return man, man.exit_code


__all__ = ["run_experiment", "output_dir", "sweep_lattice", "MODES", "STRUCTURAL",
           "EXIT_OK", "EXIT_CHECKS", "EXIT_ERROR", "OUT_ENV", "to_plain"]
