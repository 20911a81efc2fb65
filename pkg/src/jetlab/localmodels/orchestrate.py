"""Putting the local models together.

approximate_primitive picks the tangent or transverse path for one
primitive section.  approximate_top_order runs it over the decomposition
of a top-order section, composing isotopies and pushing each new
approximation forward.  reduce_order performs one recursion step from an
order-l vanishing section to top-order problems.
"""
from __future__ import annotations

import itertools
from fractions import Fraction
from math import factorial, gcd

import numpy as np

from ..lingeo import face_hyperplane_angle
from ..polyjet.expression import Expr, VectorField, compose, coords
from ..polyjet.fields import CallableField, ComposedField, FieldSum
from ..polyjet.jet import Jet
from ..polyjet.multiindex import basis, from_multiset
from ..polyjet.ops import jet_compose, jet_norms, jet_project
from ..polyjet.section import JetSection
from ..polyjet.truncpoly import TruncatedPoly
from ..primitive import PrimitiveSection, TopOrderSection, decomposition_weights
from .adjust import BAND, AngleError, band_points, cube_band_points, transversality_adjust
from .isotopy import ComposedIsotopy, ConjugatedIsotopy, linear_polys
from .result import ApproximationResult, HolonomicSection, IdentityIsotopy, StageError
from .transverse import (CHUNK, OP_MARGIN, TransverseModel, isotopy_checks, shell_points,
                         slab_points, transverse_approximate, uprime_points)

DEFAULT_LAMBDA = np.pi / 8
# a later wiggle of size eps must stay inside the plateau of an earlier tangent band
TANGENT_CLEARANCE = 0.8
MAX_DIMS = {"m": 2, "r": 2, "n": 2}


# ------------------------------------------------------------------ frames

def transverse_frame(u: np.ndarray, k: int) -> tuple[np.ndarray, float, int]:
    """(L, s, i*) with L = A / s, rows of A: u, e_i (i < m-1, i != i*), e_{m-1}.

    A sends the co-normal direction to the first axis, keeps the last axis
    (the wiggle direction) and keeps R^k x 0 inside R^k x 0.  s = ||A||_inf,
    so L maps the cube into itself.
    """
    m = len(u)
    istar = int(np.argmax(np.abs(u[:k])))
    rows = [u] + [np.eye(m)[i] for i in range(m - 1) if i != istar] + [np.eye(m)[m - 1]]
    A = np.array(rows, dtype=np.float64)
    s = float(np.max(np.sum(np.abs(A), axis=1)))
    return A / s, s, istar


def frame_field(v: VectorField, Linv: np.ndarray, factor: float) -> VectorField:
    """x_hat -> factor * v(Linv x_hat) as an expression field."""
    m = Linv.shape[0]
    xs = coords(m)
    inner = []
    for row in Linv:
        terms = [float(c) * xs[j] for j, c in enumerate(row) if c != 0]
        acc = terms[0]
        for t in terms[1:]:
            acc = acc + t
        inner.append(acc)
    if v.components is None:
        lin = _LinearMap(Linv)
        return ComposedField(v, lin, "frame").scaled(factor)
    return VectorField([Expr.const(factor) * compose(c, inner) for c in v.components])


class _LinearMap:
    def __init__(self, M):
        self.M = np.asarray(M, dtype=np.float64)
        self.m = self.M.shape[0]

    def map_polys(self, X, t=1.0, z=None):
        return linear_polys(self.M, X)

    def __call__(self, points, t=1.0, z=None):
        return np.atleast_2d(points) @ self.M.T


def linear_pullback_jet(jet_hat: Jet, L: np.ndarray, points: np.ndarray) -> Jet:
    """Jet at x of f_hat(L x), given the jet of f_hat at L x."""
    X = TruncatedPoly.identity(np.zeros_like(points), jet_hat.r)
    X = [x.broadcast(len(points)) for x in X]
    inner = linear_polys(L, X)
    return Jet(points, [p.substitute(inner) for p in jet_hat.components])


def pushforward_section(fhat: HolonomicSection, F) -> HolonomicSection:
    """j^r(f o F^{-1}) for a holonomic j^r(f) and an isotopy F (time one)."""
    if isinstance(F, IdentityIsotopy):
        return fhat

    def jet_fn(pts, r):
        y = F.inverse(pts)
        inv = F.inverse_jet(pts, r)
        return jet_compose(fhat.evaluate(y, r), inv, tol=1e-8)
    return HolonomicSection(jet_fn, fhat.m, fhat.n, fhat.r)


def sum_sections(parts: list[HolonomicSection]) -> HolonomicSection:
    def jet_fn(pts, r):
        jets = [p.evaluate(pts, r) for p in parts]
        comps = jets[0].components
        for j in jets[1:]:
            comps = [a + b for a, b in zip(comps, j.components)]
        return Jet(pts, comps)
    first = parts[0]
    return HolonomicSection(jet_fn, first.m, first.n, first.r)


def zero_section(m: int, n: int, r: int) -> HolonomicSection:
    return HolonomicSection(lambda pts, rr: Jet.zeros(pts, n, rr), m, n, r)


# --------------------------------------------------------------- primitive

def skeleton_angle(u: np.ndarray, k: int) -> float:
    """Angle between R^k x 0 and ker <u, .>."""
    return float(face_hyperplane_angle(range(k), np.asarray(u, dtype=np.float64))[0])


def approximate_primitive(sigma: PrimitiveSection, k: int, eps: float, delta: float,
                          lam: float = DEFAULT_LAMBDA, measure: bool = True,
                          **kw) -> ApproximationResult:
    """Tangent adjustment if R^k x 0 is within lam of tau, else a frame-changed wiggle."""
    m, r = sigma.m, sigma.r
    sig = sigma.normalized()
    u = np.asarray(sig.constant_conormal, dtype=np.float64)
    angle = skeleton_angle(u, k)
    if angle <= lam:
        res = transversality_adjust(sig, delta, k, measure=measure,
                                    **{a: b for a, b in kw.items() if a in ("band", "per_axis")})
        res.params["skeleton_angle"] = angle
        res.params["lambda"] = lam
        return res
    L, s, istar = transverse_frame(u, k)
    tkw = {a: b for a, b in kw.items() if a in ("per_delta", "per_eps", "other", "W", "z")}
    if np.allclose(L, np.eye(m), atol=0, rtol=0):
        res = transverse_approximate(PrimitiveSection(sig.v, np.eye(m)[0], r, m), k, eps,
                                     delta, measure=measure, **tkw)
        res.params.update({"skeleton_angle": angle, "lambda": lam, "frame": L})
        return res
    Linv = np.linalg.inv(L)
    vhat = frame_field(sig.v, Linv, s ** r)
    hat = transverse_approximate(PrimitiveSection(vhat, np.eye(m)[0], r, m), k, eps, delta,
                                 measure=False, **tkw)
    model: TransverseModel = hat.model

    def jet_fn(pts, rr):
        return linear_pullback_jet(model.f_jet(pts @ L.T, rr), L, pts)
    F = ConjugatedIsotopy(model.W, L)
    res = ApproximationResult(
        HolonomicSection(jet_fn, m, sig.n, r), F, "transverse",
        params={**hat.params, "skeleton_angle": angle, "lambda": lam, "frame": L,
                "frame_scale": s, "pivot_axis": istar, "conormal": u},
        checks=dict(hat.checks), measurements=dict(hat.measurements))
    res.model = model
    if measure:
        _measure_framed(res, sig, model, L, Linv, u, kw)
    return res


def _measure_framed(res, sig, model, L, Linv, u, kw):
    W = model.W
    per_delta, per_eps, other = kw.get("per_delta", 8), kw.get("per_eps", 16), kw.get("other", 17)
    up = uprime_points(W, per_delta, per_eps, other) @ Linv.T
    c0 = 0.0
    for s in range(0, len(up), CHUNK):
        pts = up[s:s + CHUNK]
        a, b = res.sigma_hat.evaluate(pts), sig.evaluate(pts)
        diff = Jet(pts, [x - y for x, y in zip(a.components, b.components)])
        c0 = max(c0, float(np.max(jet_norms(diff).c0, initial=0.0)))
    slab = slab_points(W, per_delta, per_eps, other) @ Linv.T
    perp = 0.0
    for s in range(0, len(slab), CHUNK):
        nr = jet_norms(res.sigma_hat.evaluate(slab[s:s + CHUNK]), u)
        perp = max(perp, float(np.max(nr.perp, initial=0.0)))
    shell = shell_points(sig.m, OP_MARGIN * W.eps)
    fb = res.sigma_hat.evaluate(shell)
    iso = isotopy_checks(W, slab_points(W, 2, 4, 5), None, shell_points(sig.m, OP_MARGIN * W.eps))
    moved = float(np.max(np.abs(res.isotopy(shell) - shell)))
    res.measurements.update({"c0_error_uprime": c0, "perp_sup": perp,
                             "max_displacement": iso["max_displacement"],
                             "boundary_displacement_original_frame": moved})
    res.checks.update({"boundary_vanishing": bool(all(np.all(p.coeffs == 0)
                                                      for p in fb.components)),
                       "c0_small": iso["c0_small"], "v_invariant_frame": iso["v_invariant"],
                       "boundary_identity_frame": iso["boundary_identity"]})


# --------------------------------------------------------------- top order

def primitive_terms(m: int, r: int, coeffs: dict, n: int) -> list[PrimitiveSection]:
    """Merged primitive summands of a top-order section with arbitrary coefficient fields.

    Same weights as decompose_top_order/merge_redundant, but builds the
    summand fields as weighted sums so non-expression fields work too.
    """
    table = decomposition_weights(m, r)
    groups: dict = {}
    for beta, row in table.items():
        w = np.zeros(m, dtype=np.int64)
        for b in beta:
            w[b] += 1
        g = 0
        for c in w:
            g = gcd(g, int(c))
        d = tuple(int(c) // g for c in w)
        scale = Fraction(g) ** r
        entry = groups.setdefault(d, {})
        for a, c in row.items():
            if a in coeffs:
                entry[a] = entry.get(a, Fraction(0)) + c * scale
    out = []
    for d, weights in groups.items():
        weights = {a: c for a, c in weights.items() if c != 0}
        if not weights:
            continue
        fields = [coeffs[a] for a in weights]
        if all(f.components is not None for f in fields):
            comps = []
            for c in range(n):
                ts = [Expr.const(wt) * coeffs[a].components[c] for a, wt in weights.items()]
                comps.append(ts[0] if len(ts) == 1 else Expr("add", tuple(ts)))
            v = VectorField(comps)
        else:
            v = FieldSum([(wt, coeffs[a]) for a, wt in weights.items()])
        label = tuple(i for i, kk in enumerate(d) for _ in range(kk))
        out.append(PrimitiveSection(v, np.array(d), r, m, weights, label))
    return out


def order_terms(terms: list[PrimitiveSection], k: int, lam: float):
    """(term, path) pairs, tangent terms first; stable within each group."""
    tagged = []
    for t in terms:
        u = np.asarray(t.normalized().constant_conormal, dtype=np.float64)
        tagged.append((t, "tangent" if skeleton_angle(u, k) <= lam else "transverse"))
    return [x for x in tagged if x[1] == "tangent"] + [x for x in tagged if x[1] == "transverse"]


def default_schedule(paths: list[str], eps: float, delta: float) -> list[tuple[float, float]]:
    """(eps, delta) per stage.

    When a wiggle follows, tangent stages widen to delta_t = 2 eps so the
    wiggle stays inside their plateaus.
    """
    wide = "transverse" in paths
    return [(eps, 2.0 * eps) if p == "tangent" and wide else (eps, delta) for p in paths]


def _check_dims(m, r, n):
    for name, val in (("m", m), ("r", r), ("n", n)):
        if val > MAX_DIMS[name]:
            raise ValueError(f"{name} = {val} exceeds the supported desk scale "
                             f"({name} <= {MAX_DIMS[name]})")


def approximate_top_order(sigma: TopOrderSection, k: int, schedule=None, eps: float = 0.1,
                          delta: float = 0.005, lam: float = DEFAULT_LAMBDA,
                          measure: bool = True, **kw) -> ApproximationResult:
    """Induction over the primitive summands of a top-order section."""
    m, r, n = sigma.m, sigma.r, sigma.n
    _check_dims(m, r, n)
    terms = primitive_terms(m, r, sigma.coeffs, n)
    return solve_terms(terms, m, r, n, k, schedule, eps, delta, lam, measure,
                       target=sigma, **kw)


def solve_terms(terms, m, r, n, k, schedule, eps, delta, lam, measure, target=None,
                base_isotopy=None, **kw) -> ApproximationResult:
    ordered = order_terms(terms, k, lam)
    paths = [p for _, p in ordered]
    if schedule is None:
        schedule = default_schedule(paths, eps, delta)
    schedule = list(schedule)
    if len(schedule) != len(ordered):
        raise ValueError(f"schedule has {len(schedule)} entries for {len(ordered)} summands")
    tangent_deltas = [d for (e, d), p in zip(schedule, paths) if p == "tangent"]
    for (e, d), p in zip(schedule, paths):
        if p == "transverse" and tangent_deltas and e >= TANGENT_CLEARANCE * min(tangent_deltas):
            raise ValueError(f"transverse eps={e} must be < {TANGENT_CLEARANCE} * tangent "
                             f"delta={min(tangent_deltas)}")
    F = base_isotopy if base_isotopy is not None else IdentityIsotopy(m)
    parts: list[HolonomicSection] = []
    stages = []
    last_transverse = None
    for idx, ((term, path), (e, d)) in enumerate(zip(ordered, schedule)):
        sec = term
        if not isinstance(F, IdentityIsotopy):
            dvec = np.asarray(term.constant_conormal, dtype=np.float64)
            bad = [w for w in _motions(F) if abs(float(dvec @ w)) > 1e-12]
            if bad:
                raise StageError(idx, "pullback of this summand through the earlier wiggles "
                                 "is not primitive (co-normal not orthogonal to the motion)",
                                 {"conormal": dvec.tolist(), "motions": [b.tolist() for b in bad]})
            sec = PrimitiveSection(ComposedField(term.v, F), term.constant_conormal, r, m,
                                   term.weights, term.label)
        try:
            res = approximate_primitive(sec, k, e, d, lam, measure=measure, **kw)
        except (AngleError, ValueError) as exc:
            raise StageError(idx, str(exc)) from exc
        stages.append({"index": idx, "path": res.path, "beta": list(term.label or ()),
                       "eps": e, "delta": d, "params": res.params,
                       "measurements": res.measurements, "checks": res.checks})
        parts.append(pushforward_section(res.sigma_hat, F))
        if res.path == "transverse":
            last_transverse = (res, F)
            F = res.isotopy if isinstance(F, IdentityIsotopy) else ComposedIsotopy(F, res.isotopy)
    total = sum_sections(parts) if parts else zero_section(m, n, r)
    out = ApproximationResult(total, F, "top_order",
                              params={"m": m, "r": r, "n": n, "k": k, "lambda": lam,
                                      "schedule": schedule, "paths": paths},
                              stages=stages)
    out.checks["stages_ok"] = all(all(bool(v) for v in s["checks"].values()) for s in stages)
    if measure:
        _measure_top(out, target, m, r, k, schedule, paths, last_transverse, kw)
    return out


def _motions(F):
    if hasattr(F, "motions"):
        return list(F.motions)
    if hasattr(F, "motion"):
        return [F.motion]
    return []


def final_neighbourhood(m, k, schedule, paths, last_transverse, kw) -> np.ndarray:
    if last_transverse is None:
        ds = [d for _, d in schedule] or [0.1]
        return band_points(np.eye(m)[-1], k, BAND * min(ds), kw.get("per_axis", 41))
    res, before = last_transverse
    W = res.model.W
    pts = uprime_points(W, kw.get("per_delta", 8), kw.get("per_eps", 16), kw.get("other", 17))
    if isinstance(res.isotopy, ConjugatedIsotopy):
        pts = pts @ res.isotopy.Linv.T
    return before(pts)


def sample_cube(m, stages, last_transverse, kw) -> np.ndarray:
    """Uniform samples of I^m plus each tangent band and the last wiggle's slab."""
    g = np.stack([a.ravel() for a in np.meshgrid(*[np.linspace(-1, 1, 41)] * m,
                                                 indexing="ij")], axis=1)
    extra = [g]
    for st in stages:
        if st["path"] == "tangent":
            extra.append(cube_band_points(np.asarray(st["params"]["normal"]), st["delta"],
                                          kw.get("per_axis", 41)))
    if last_transverse is not None:
        res, before = last_transverse
        pts = slab_points(res.model.W, kw.get("per_delta", 8), kw.get("per_eps", 16),
                          kw.get("other", 17))
        if isinstance(res.isotopy, ConjugatedIsotopy):
            pts = pts @ res.isotopy.Linv.T
        extra.append(before(pts))
    pts = np.concatenate(extra)
    return pts[np.all(np.abs(pts) <= 1, axis=1)]


def _measure_top(out, target, m, r, k, schedule, paths, last_transverse, kw):
    near = final_neighbourhood(m, k, schedule, paths, last_transverse, kw)
    dist = 0.0
    if target is not None:
        for s in range(0, len(near), CHUNK):
            pts = near[s:s + CHUNK]
            a, b = out.sigma_hat.evaluate(pts), target.evaluate(pts)
            diff = Jet(pts, [x - y for x, y in zip(a.components, b.components)])
            dist = max(dist, float(np.max(jet_norms(diff).c0, initial=0.0)))
    low = 0.0
    cube = sample_cube(m, out.stages, last_transverse, kw)
    for s in range(0, len(cube), CHUNK):
        jet = out.sigma_hat.evaluate(cube[s:s + CHUNK], r - 1)
        low = max(low, float(np.max(jet_norms(jet).c0, initial=0.0)))
    eps_min = min(e for e, _ in schedule) if schedule else 0.1
    shell = shell_points(m, OP_MARGIN * eps_min)
    fb = out.sigma_hat.evaluate(shell)
    out.measurements.update({"dist_final_neighbourhood": dist, "lower_jet_sup": low,
                             "cube_samples": int(len(cube))})
    out.checks["boundary_vanishing"] = bool(all(np.all(p.coeffs == 0) for p in fb.components))


# --------------------------------------------------------- order reduction

class PolynomialSection(JetSection):
    """sigma with coefficient fields a_alpha for l < |alpha| <= r (sorted-tuple keys)."""

    def __init__(self, m: int, r: int, coeffs: dict, n: int | None = None):
        self.m, self.r = m, r
        self.coeffs = {}
        for alpha, a in coeffs.items():
            key = tuple(sorted(int(i) for i in alpha))
            if len(key) > r or any(not 0 <= i < m for i in key):
                raise ValueError(f"bad multi-index {alpha} for m={m}, r={r}")
            self.coeffs[key] = a if isinstance(a, VectorField) else VectorField(a)
        ns = {vf.n for vf in self.coeffs.values()}
        if len(ns) > 1:
            raise ValueError("all coefficient fields need the same number of outputs")
        self.n = ns.pop() if ns else (n or 1)

    @property
    def vanishing_order(self) -> int:
        """Largest l with sigma^(l) = 0 (structurally)."""
        return min((len(a) for a in self.coeffs), default=self.r + 1) - 1

    def truncate(self, l: int) -> "PolynomialSection":
        return PolynomialSection(self.m, l, {a: f for a, f in self.coeffs.items()
                                             if len(a) <= l}, self.n)

    def top(self) -> TopOrderSection:
        return TopOrderSection(self.m, self.r, {a: f for a, f in self.coeffs.items()
                                                if len(a) == self.r}, self.n)

    def evaluate(self, points, r: int | None = None) -> Jet:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        rr = self.r if r is None else r
        comps = [TruncatedPoly.zeros(self.m, rr, len(pts)) for _ in range(self.n)]
        b = basis(self.m, rr)
        for alpha, vf in self.coeffs.items():
            if len(alpha) > rr:
                continue
            vals = np.atleast_2d(vf.evaluate(pts)).reshape(len(pts), self.n)
            slot = b.position[from_multiset(alpha, self.m)]
            for c in range(self.n):
                comps[c].coeffs[slot] += vals[:, c]
        return Jet(pts, comps)

    def to_json(self) -> dict:
        return {"m": self.m, "r": self.r, "n": self.n,
                "coeffs": [{"alpha": [i + 1 for i in a], "field": vf.to_json()}
                           for a, vf in sorted(self.coeffs.items())]}


def derivative_field(h: HolonomicSection, alpha: tuple, r_extra: int) -> CallableField:
    """x -> d_alpha h(x) / alpha!, i.e. the alpha coefficient of j^r h, as a field."""
    m = h.m
    exps = from_multiset(alpha, m)
    afac = 1
    for e in exps:
        afac *= factorial(e)

    def jet_fn(pts, rr):
        jet = h.evaluate(pts, len(alpha) + rr)
        out = []
        for p in jet.components:
            q = p
            for axis, e in enumerate(exps):
                for _ in range(e):
                    q = q.derivative(axis)
            out.append(q.truncate(rr) * (1.0 / afac))
        return out
    return CallableField(jet_fn, m, h.n, f"coefficient{list(a + 1 for a in alpha)}")


def reduce_order(sigma: PolynomialSection, k: int = 0, eps: float = 0.1, delta: float = 0.005,
                 lam: float = DEFAULT_LAMBDA, depth: int = 0, measure: bool = True,
                 **kw) -> ApproximationResult:
    """One step of order reduction, recursing on the (r-1)-jet.

    mu = sigma^(r-1) is solved first (top-order if it vanishes below r-1, else
    recursively).  With h the result, nu has top coefficients
    a_alpha - d_alpha h / alpha!, is pulled back by H_1 and solved as a
    top-order section; sigma-hat = j^r(h) + (H_1)_* nu-hat.
    """
    m, r, n = sigma.m, sigma.r, sigma.n
    _check_dims(m, r, n)
    if depth > r:
        raise RuntimeError("order reduction recursed deeper than r")
    l = sigma.vanishing_order
    if l >= r - 1:
        top = sigma.top()
        res = approximate_top_order(top, k, None, eps, delta, lam, measure, **kw)
        res.params["depth"] = depth
        return res
    mu = sigma.truncate(r - 1)
    inner = reduce_order(mu, k, eps, delta, lam, depth + 1, measure=False, **kw)
    h = inner.sigma_hat
    H = inner.isotopy
    nu_coeffs = {}
    for alpha in itertools.combinations_with_replacement(range(m), r):
        d = derivative_field(h, alpha, 0)
        if alpha in sigma.coeffs:
            nu_coeffs[alpha] = FieldSum([(1, sigma.coeffs[alpha]), (-1, d)])
        else:
            nu_coeffs[alpha] = FieldSum([(-1, d)])
    terms = primitive_terms(m, r, nu_coeffs, n)
    try:
        nu_res = solve_terms(terms, m, r, n, k, None, eps, delta, lam, False,
                             base_isotopy=H, **kw)
    except StageError as exc:
        raise StageError(exc.stage, f"order {r}: {exc.reason}", exc.report) from exc
    hr = HolonomicSection(lambda p, rr: h.evaluate(p, rr), m, n, r)
    total = sum_sections([hr, nu_res.sigma_hat])
    out = ApproximationResult(total, nu_res.isotopy, "reduce",
                              params={"m": m, "r": r, "n": n, "k": k, "l": l, "depth": depth,
                                      "eps": eps, "delta": delta},
                              stages=[{"order": r - 1, "path": inner.path,
                                       "stages": inner.stages},
                                      {"order": r, "path": nu_res.path,
                                       "stages": nu_res.stages}])
    if measure:
        schedule = nu_res.params["schedule"]
        paths = nu_res.params["paths"]
        cube = sample_cube(m, inner.stages + nu_res.stages, None, kw)
        low = 0.0
        for s in range(0, len(cube), CHUNK):
            jet = total.evaluate(cube[s:s + CHUNK], l)
            low = max(low, float(np.max(jet_norms(jet).c0, initial=0.0)))
        near = final_neighbourhood(m, k, schedule, paths, None, kw)
        a, b = total.evaluate(near), sigma.evaluate(near)
        diff = Jet(near, [x - y for x, y in zip(a.components, b.components)])
        shell = shell_points(m, OP_MARGIN * eps)
        fb = total.evaluate(shell)
        out.measurements.update({"vanishing_jet_sup": low,
                                 "dist_final_neighbourhood":
                                     float(np.max(jet_norms(diff).c0, initial=0.0))})
        out.checks["boundary_vanishing"] = bool(all(np.all(p.coeffs == 0)
                                                    for p in fb.components))
    return out
