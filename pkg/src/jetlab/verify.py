"""Bound checks and scaling sweeps.

Every check reports the grid maximum of a measured quantity, the bound's
right-hand side without its constant, and their ratio.  Nothing here decides
pass or fail: the constants are existential, so the evidence is that ratios
stay bounded and stable across a sweep.  A check is re-run on a grid refined
by the grid's refinement factor; if the maximum moves by 5% or more the row
is flagged as under-resolved.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from .localmodels.adjust import transversality_adjust
from .localmodels.isotopy import WiggleIsotopy, build_wiggle_isotopy, cutoff_phi_poly
from .localmodels.result import ApproximationResult
from .localmodels.transverse import measure_transverse, transverse_approximate
from .polyjet.grid import GridSpec
from .polyjet.multiindex import basis
from .polyjet.ops import holonomy_defect, jacobian, section_cr_norm
from .polyjet.truncpoly import TruncatedPoly
from .primitive import PrimitiveSection
from .profiles import STEP

__all__ = ["GridSpec", "BoundStat", "SweepRow", "SweepReport", "bound_check", "scaling_sweep",
           "KINDS", "CSV_COLUMNS", "REFINEMENT_TOLERANCE", "HolonomyTrend", "holonomy_trend",
           "probe_centre", "probe_holonomy", "diagonal_lattice", "product_lattice"]

KINDS = ("h_mixed", "dF", "phi", "b", "conclusion_c0", "conclusion_perp", "adjust")
CSV_COLUMNS = ("eps", "delta", "ratio_kind", "lhs_max", "bound_rhs", "ratio", "fitted_C",
               "resolved_flag")
REFINEMENT_TOLERANCE = 0.05


@dataclass
class BoundStat:
    kind: str
    lhs_max: float
    bound_rhs: float
    ratio: float
    grid: GridSpec | None = None
    resolved: bool = True
    refined_lhs: float | None = None
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"kind": self.kind, "lhs_max": self.lhs_max, "bound_rhs": self.bound_rhs,
                "ratio": self.ratio, "resolved": self.resolved,
                "refined_lhs": self.refined_lhs,
                "grid": None if self.grid is None else self.grid.to_json(),
                "details": _plain(self.details)}


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _stable(a: float, b: float) -> bool:
    scale = max(abs(a), abs(b))
    return scale == 0 or abs(a - b) < REFINEMENT_TOLERANCE * scale


# ----------------------------------------------------------------- kernels

def _h_mixed(sigma: PrimitiveSection, delta: float, grid: GridSpec, across: int):
    """max over |y_1 - x_1| <= delta of |d_x^a d_y^b h| / delta^(r - M - N).

    The closed band: the sup over the open one is attained in the limit.
    """
    m, r = sigma.m, sigma.r
    xs = grid.points()
    s = np.linspace(-delta, delta, across)
    X = np.repeat(xs, len(s), axis=0)
    Y = X.copy()
    Y[:, 0] += np.tile(s, len(xs))
    keep = np.abs(Y[:, 0]) <= 1
    X, Y = X[keep], Y[keep]
    big = basis(2 * m, r)
    ident = TruncatedPoly.identity(np.concatenate([X, Y], axis=1), r)
    h = (ident[m] - ident[0]) ** r
    vals = sigma.v.jet(ident[:m])
    best, arg = 0.0, None
    for c, vc in enumerate(vals):
        D = (h * vc).coeffs * np.array(big.factorials, dtype=np.float64)[:, None]
        for k, idx in enumerate(big.indices):
            mn = idx[0] + idx[m]
            w = np.max(np.abs(D[k])) / delta ** (r - mn)
            if w > best:
                best, arg = w, (idx, float(np.max(np.abs(D[k]))), delta ** (r - mn))
    return best, arg


def _dF(W: WiggleIsotopy, grid: GridSpec, z=None):
    J = jacobian(W.jet(grid.points(), 1, 1.0, z)) - np.eye(W.m)[None]
    return float(np.max(np.linalg.norm(J, ord=2, axis=(1, 2))))


def _phi(W: WiggleIsotopy, r: int, grid: GridSpec, z=None):
    """max over alpha of |d_alpha phi| eps^N delta^M, M = #first-axis indices."""
    pts = grid.points()
    best, arg = 0.0, None
    b = basis(W.m, r)
    for s in range(0, len(pts), 40000):
        poly, _ = cutoff_phi_poly(W, pts[s:s + 40000], r, z)
        D = poly.coeffs * np.array(b.factorials, dtype=np.float64)[:, None]
        for k, idx in enumerate(b.indices):
            M = idx[0]
            N = sum(idx) - M
            lhs = float(np.max(np.abs(D[k]), initial=0.0))
            w = lhs * W.eps ** N * W.delta ** M
            if w > best:
                best, arg = w, (idx, lhs, 1.0 / (W.eps ** N * W.delta ** M))
    return best, arg


def _b(eps: float, delta: float, order: int, grid: GridSpec):
    """|b^(i)| eps^i / delta on samples of u; exactly 4^i sup|eta^(i)|."""
    u = grid.points()[:, 0]
    ders = STEP.derivatives(4.0 * u / eps, order)
    out = {}
    for i in range(1, order + 1):
        lhs = float(np.max(np.abs(delta * (4.0 / eps) ** i * ders[i])))
        out[i] = (lhs, delta / eps ** i)
    return out


# ------------------------------------------------------------- bound_check

def bound_check(kind: str, inputs, grid: GridSpec | None = None, refine: bool = True,
                **opts) -> BoundStat:
    """Grid max of a bound's left side over its right side (without C).

    inputs by kind:
      h_mixed          PrimitiveSection with co-normal e_1; opts: delta
      dF               WiggleIsotopy
      phi              WiggleIsotopy; opts: r
      b                (eps, delta); opts: order (default 1)
      conclusion_c0    ApproximationResult of transverse_approximate
      conclusion_perp  ApproximationResult of transverse_approximate
      adjust           ApproximationResult of transversality_adjust
    """
    if kind not in KINDS:
        raise ValueError(f"unknown bound kind {kind!r}; expected one of {KINDS}")
    fn = _DISPATCH[kind]
    stat = fn(inputs, grid, **opts)
    if refine:
        fine = fn(inputs, stat.grid.refined() if stat.grid is not None else None,
                  _refined=True, **opts)
        stat.refined_lhs = fine.lhs_max
        # compare ratios: for the indexed kinds the worst index may move
        stat.resolved = _stable(stat.ratio, fine.ratio)
    return stat


def _check_h_mixed(sigma, grid, delta=None, across=9, _refined=False):
    if delta is None:
        raise ValueError("h_mixed needs delta")
    grid = grid or GridSpec.uniform(sigma.m, 81)
    norm = section_cr_norm(sigma, GridSpec.uniform(sigma.m, 33))
    w, arg = _h_mixed(sigma, delta, grid, 2 * across - 1 if _refined else across)
    if arg is None:
        return BoundStat("h_mixed", 0.0, norm, 0.0, grid, details={"sigma_cr": norm})
    idx, lhs, rhs = arg
    return BoundStat("h_mixed", lhs, norm * rhs, float(w / norm) if norm else 0.0, grid,
                     details={"worst_index": idx, "sigma_cr": norm})


def _check_dF(W, grid, z=None, _refined=False):
    if grid is None:
        n1 = int(round(2.0 / W.delta * 8)) + 1
        grid = GridSpec((n1,) + (17,) * (W.m - 1))
    lhs = _dF(W, grid, z)
    rhs = W.eps / W.delta
    return BoundStat("dF", lhs, rhs, lhs / rhs, grid)


def _check_phi(W, grid, r=1, z=None, _refined=False):
    if grid is None:
        n1 = int(round(2.0 / W.delta * 8)) + 1
        grid = GridSpec((n1,) + (9,) * (W.m - 2) + (33,), upper=(1.0,) * (W.m - 1) + (W.eps,),
                        lower=(-1.0,) * (W.m - 1) + (-W.eps,))
    w, arg = _phi(W, r, grid, z)
    if arg is None:
        return BoundStat("phi", 0.0, 1.0, 0.0, grid)
    idx, lhs, rhs = arg
    return BoundStat("phi", lhs, rhs, w, grid, details={"worst_index": idx})


def _check_b(inputs, grid, order=1, _refined=False):
    eps, delta = inputs
    grid = grid or GridSpec((2001,), (-eps / 2,), (eps / 2,))
    per = _b(eps, delta, order, grid)
    lhs, rhs = per[order]
    exact = 4.0 ** order * STEP.sup_norms(order)[order]
    return BoundStat("b", lhs, rhs, lhs / rhs, grid,
                     details={"order": order, "exact_ratio": exact,
                              "all_orders": {i: a / b for i, (a, b) in per.items()}})


def _slab_grid(res: ApproximationResult, rule: dict) -> GridSpec:
    W = res.model.W
    n1 = int(round(2.0 / W.delta * rule["per_delta"])) + 1
    nm = int(round(2.0 * rule["per_eps"])) + 1
    return GridSpec((n1,) + (rule["other"],) * (W.m - 2) + (nm,),
                    (-1.0,) * (W.m - 1) + (-W.eps,), (1.0,) * (W.m - 1) + (W.eps,))


def _transverse_measure(res, refined):
    rule = dict(res.grid_rule)
    if refined:
        rule = {"per_delta": 2 * rule["per_delta"], "per_eps": 2 * rule["per_eps"],
                "other": 2 * rule["other"] - 1}
        meas = measure_transverse(res.model, res.sigma, rule["per_delta"], rule["per_eps"],
                                  rule["other"])
    else:
        meas = res.measurements
    return meas, _slab_grid(res, rule)


def _check_conclusion(kind):
    def run(res, grid, _refined=False):
        if res.path != "transverse" or res.model is None:
            raise ValueError(f"{kind} needs a transverse_approximate result")
        meas, g = _transverse_measure(res, _refined)
        W = res.model.W
        norm = res.norms.get("sigma_cr") or section_cr_norm(res.sigma,
                                                           GridSpec.uniform(W.m, 33))
        if kind == "conclusion_c0":
            lhs, rhs = meas["c0_error_uprime"], norm * (W.eps + W.delta / W.eps)
        else:
            lhs, rhs = meas["perp_sup"], norm * W.delta / W.eps
        return BoundStat(kind, lhs, rhs, lhs / rhs if rhs else 0.0, g,
                         details={"sigma_cr": norm})
    return run


def _check_adjust(res, grid, _refined=False):
    if res.path != "tangent" or res.sigma is None:
        raise ValueError("adjust needs a transversality_adjust result")
    p = res.params
    if _refined:
        per = 2 * res.grid_rule.get("per_axis", 41) - 1
        res = transversality_adjust(res.sigma, p["delta"], p["k"], band=p["band"], per_axis=per)
    norm = res.norms["sigma_cr"]
    lhs = res.measurements["dist_near_face"]
    rhs = norm * (p["angle"] + p["delta"])
    per = res.grid_rule.get("per_axis", 41)
    g = GridSpec((per,) * p["k"] + (9,), (-1.0,) * p["k"] + (-p["band"] * p["delta"],),
                 (1.0,) * p["k"] + (p["band"] * p["delta"],))
    return BoundStat("adjust", lhs, rhs, lhs / rhs if rhs else 0.0, g,
                     details={"angle": p["angle"], "sigma_cr": norm})


_DISPATCH = {
    "h_mixed": _check_h_mixed, "dF": _check_dF, "phi": _check_phi, "b": _check_b,
    "conclusion_c0": _check_conclusion("conclusion_c0"),
    "conclusion_perp": _check_conclusion("conclusion_perp"),
    "adjust": _check_adjust,
}


# ----------------------------------------------------------------- sweeps

@dataclass
class SweepRow:
    params: dict
    kind: str
    stat: BoundStat | None = None
    error: str | None = None
    fitted_C: float = float("nan")

    @property
    def eps(self):
        return self.params.get("eps", "")

    @property
    def delta(self):
        return self.params.get("delta", "")

    def csv_row(self) -> list:
        if self.stat is None:
            return [self.eps, self.delta, self.kind, "", "", "", _fmt(self.fitted_C), "error"]
        s = self.stat
        return [_fmt(self.eps), _fmt(self.delta), self.kind, _fmt(s.lhs_max), _fmt(s.bound_rhs),
                _fmt(s.ratio), _fmt(self.fitted_C), "resolved" if s.resolved else "under_resolved"]

    def to_json(self) -> dict:
        return {"params": _plain(self.params), "kind": self.kind, "error": self.error,
                "fitted_C": None if math.isnan(self.fitted_C) else self.fitted_C,
                "stat": None if self.stat is None else self.stat.to_json()}


def _fmt(x) -> str:
    if x == "" or x is None:
        return ""
    return repr(float(x))


@dataclass
class SweepReport:
    construction: str
    rows: list[SweepRow]
    summary: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def ratios(self, kind: str) -> np.ndarray:
        return np.array([r.stat.ratio for r in self.rows if r.kind == kind and r.stat])

    def band(self, kind: str) -> float:
        """max/min of the ratios of one kind (inf if any is zero)."""
        rs = self.ratios(kind)
        if len(rs) == 0:
            return float("nan")
        return float(np.max(rs) / np.min(rs)) if np.min(rs) > 0 else float("inf")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow(r.csv_row())
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"construction": self.construction, "columns": list(CSV_COLUMNS),
                "rows": [r.to_json() for r in self.rows], "summary": _plain(self.summary),
                "metadata": _plain(self.metadata)}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2, allow_nan=False,
                          default=str)


def _summarize(rows: list[SweepRow]) -> dict:
    """Per kind: fitted C (geometric mean of ratios), max/min band, slope of
    log lhs against log rhs, and whether raw maxima decrease in lattice order."""
    out = {}
    kinds = sorted({r.kind for r in rows}, key=KINDS.index)
    for kind in kinds:
        good = [r for r in rows if r.kind == kind and r.stat is not None]
        ratios = np.array([r.stat.ratio for r in good])
        lhs = np.array([r.stat.lhs_max for r in good])
        rhs = np.array([r.stat.bound_rhs for r in good])
        pos = ratios > 0
        C = float(np.exp(np.mean(np.log(ratios[pos])))) if np.any(pos) else 0.0
        slope = None
        if np.sum(pos) >= 2 and np.ptp(np.log(rhs[pos])) > 0:
            slope = float(np.polyfit(np.log(rhs[pos]), np.log(lhs[pos]), 1)[0])
        for r in good:
            r.fitted_C = C
        out[kind] = {
            "fitted_C": C, "max_ratio": float(ratios.max()) if len(ratios) else None,
            "min_ratio": float(ratios.min()) if len(ratios) else None,
            "band": float(ratios.max() / ratios.min()) if len(ratios) and ratios.min() > 0
            else None,
            "trend_slope": slope,
            "lhs_decreasing": bool(np.all(np.diff(lhs) < 0)) if len(lhs) > 1 else None,
            "all_resolved": all(r.stat.resolved for r in good),
            "failures": sum(1 for r in rows if r.kind == kind and r.stat is None),
        }
    return out


def _construct(name: str, params: dict, sigma, grid_rule: dict):
    rule = dict(grid_rule or {})
    if name == "transverse":
        return transverse_approximate(sigma, params.get("k", 1), params["eps"],
                                      params["delta"], **rule)
    if name == "adjust":
        theta = params.get("theta", 0.0)
        m = sigma.m
        u = np.zeros(m)
        u[0], u[-1] = np.sin(theta), np.cos(theta)
        sig = PrimitiveSection(sigma.v, u, sigma.r, m)
        return transversality_adjust(sig, params["delta"], params.get("k", 1), **rule)
    if name == "wiggle":
        return build_wiggle_isotopy(sigma.m if sigma is not None else params.get("m", 2),
                                    params["eps"], params["delta"])
    raise ValueError(f"unknown construction {name!r}")


def _run_tuple(name, params, sigma, grid_rule, kinds, refine):
    rows = []
    try:
        obj = _construct(name, params, sigma, grid_rule)
    except Exception as exc:  # recorded per tuple, the sweep continues
        return [SweepRow(params, k, error=f"{type(exc).__name__}: {exc}") for k in kinds]
    params = dict(params)
    W = obj if isinstance(obj, WiggleIsotopy) else getattr(obj.model, "W", None)
    if W is not None:
        params["delta_requested"] = params.get("delta")
        params["delta"] = W.delta
    for kind in kinds:
        try:
            if kind in ("dF", "phi"):
                W = obj if isinstance(obj, WiggleIsotopy) else obj.model.W
                opts = {"r": sigma.r} if kind == "phi" and sigma is not None else {}
                stat = bound_check(kind, W, refine=refine, **opts)
            elif kind == "b":
                stat = bound_check("b", (params["eps"], params["delta"]), refine=refine)
            elif kind == "h_mixed":
                sig = getattr(obj, "sigma", None) or sigma
                stat = bound_check("h_mixed", sig, refine=refine, delta=params["delta"])
            else:
                stat = bound_check(kind, obj, refine=refine)
            rows.append(SweepRow(params, kind, stat))
        except Exception as exc:
            rows.append(SweepRow(params, kind, error=f"{type(exc).__name__}: {exc}"))
    return rows


def scaling_sweep(construction: str, lattice: list[dict], sigma: PrimitiveSection | None = None,
                  kinds=None, grid_rule: dict | None = None, refine: bool = True,
                  workers: int = 1) -> SweepReport:
    """Run a construction over a parameter lattice and tabulate bound ratios.

    ``lattice`` entries are dicts with eps/delta (and theta for the
    adjustment).  Tuples are independent; with ``workers > 1`` they run in a
    process pool and are merged back in lattice order.
    """
    default = {"transverse": ("conclusion_c0", "conclusion_perp"), "adjust": ("adjust",),
               "wiggle": ("dF", "phi", "b")}
    kinds = tuple(kinds or default.get(construction, ()))
    for k in kinds:
        if k not in KINDS:
            raise ValueError(f"unknown bound kind {k!r}")
    lattice = [dict(p) for p in lattice]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futs = [ex.submit(_run_tuple, construction, p, sigma, grid_rule, kinds, refine)
                    for p in lattice]
            chunks = [f.result() for f in futs]
    else:
        chunks = [_run_tuple(construction, p, sigma, grid_rule, kinds, refine) for p in lattice]
    rows = [r for chunk in chunks for r in chunk]
    report = SweepReport(construction, rows)
    report.summary = _summarize(rows)
    report.metadata = {"lattice": lattice, "kinds": list(kinds), "grid_rule": grid_rule or {},
                       "refinement_tolerance": REFINEMENT_TOLERANCE,
                       "sigma": None if sigma is None else sigma.to_json()}
    return report


def diagonal_lattice(eps0: float, ratio0: float, steps: int) -> list[dict]:
    """(eps, delta/eps) -> (eps/2, delta/(2 eps)) repeated ``steps`` times."""
    out = []
    e, q = eps0, ratio0
    for _ in range(steps + 1):
        out.append({"eps": e, "delta": q * e})
        e, q = e / 2, q / 2
    return out


def product_lattice(eps_values, ratios) -> list[dict]:
    return [{"eps": e, "delta": q * e} for e in eps_values for q in ratios]


def multi_indices(m: int, r: int):
    """Sorted index tuples of length r (handy for building test sections)."""
    return list(combinations_with_replacement(range(m), r))


# ------------------------------------------------------------- holonomy

@dataclass
class HolonomyTrend:
    centre: np.ndarray
    half_width: float
    defects: list[float]

    @property
    def decreasing(self) -> bool:
        d = self.defects
        return all(b < a or b <= 1e-12 for a, b in zip(d, d[1:]))

    def to_json(self) -> dict:
        return {"centre": self.centre.tolist(), "half_width": self.half_width,
                "defects": self.defects, "decreasing": self.decreasing}


def holonomy_trend(section, centre, half_width: float, counts=(33, 65, 129)) -> HolonomyTrend:
    """Interior holonomy defect on a box around ``centre`` at successively halved steps."""
    centre = np.asarray(centre, dtype=np.float64)
    lo = tuple(float(c - half_width) for c in centre)
    hi = tuple(float(c + half_width) for c in centre)
    out = [holonomy_defect(section, GridSpec((n,) * len(centre), lo, hi)).interior_max
           for n in counts]
    return HolonomyTrend(centre, half_width, out)


def probe_centre(section, m: int, k: int, samples: int = 9) -> np.ndarray:
    """Sample of I^k x 0 (inside the unit cube) where the jets of ``section`` are largest."""
    axes = [np.linspace(-0.9, 0.9, samples)] * k + [np.zeros(1)] * (m - k)
    pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    jets = section.evaluate(pts)
    size = np.zeros(len(pts))
    for p in jets.components:
        size = np.maximum(size, np.max(np.abs(np.asarray(p.coeffs, dtype=np.float64)), axis=0))
    return pts[int(np.argmax(size))]


def probe_holonomy(section, m: int, k: int, delta: float) -> HolonomyTrend:
    """Defect trend on a delta/4 box where the jets of ``section`` peak.

    The box has to sit on the live part of a wiggled section, whose features
    are a fraction of delta wide, so the centre search samples I^k finely
    (about 8 points per 2 delta, capped at 20000 samples overall).
    """
    per_axis = int(min(8 * 1.8 / delta, 20000 ** (1 / max(k, 1)))) + 1
    c = probe_centre(section, m, k, per_axis)
    return holonomy_trend(section, c, delta / 4)

