"""The transverse local model: holonomic approximation by wiggling.

For a primitive section with co-normal e_1, i.e. the germ family
h(x, y) = (y_1 - x_1)^r v(x), the approximating function is f = phi * g with

    g(x) = h(p(x), x) = (x_1 - b)^r v(b, x_2, ..., x_{m-1}, 0),
    b    = 2 j delta + (-1)^j delta eta(4 x_m / eps),   j = round(x_1 / (2 delta)),

glued across the rectangles [(2j-1) delta, (2j+1) delta] x ... on the wiggled
neighbourhood U = F_1({|y_m| < eps/4}), and phi the cutoff of the isotopy.
"""
from __future__ import annotations

import numpy as np

from ..polyjet.expression import Expr, VectorField, compose, coords
from ..polyjet.jet import Jet
from ..polyjet.ops import jet_norms, section_cr_norm
from ..polyjet.grid import GridSpec
from ..polyjet.truncpoly import TruncatedPoly
from ..primitive import PrimitiveSection
from ..profiles import STEP
from .isotopy import WiggleIsotopy, build_wiggle_isotopy, cutoff_phi_poly
from .result import ApproximationResult, HolonomicSection, StageError

CHUNK = 40000
# F_t = id and f = 0 are checked on the shell {some |x_i| >= 1 - OP_MARGIN * eps}
OP_MARGIN = 0.4
TIMES = (0.0, 0.25, 0.5, 0.75, 1.0)


class SupportError(ValueError):
    """The section does not vanish on the required boundary margin."""


def _e1_section(sigma: PrimitiveSection) -> VectorField:
    """v rescaled so that the co-normal is exactly e_1."""
    w = sigma.constant_conormal
    if w is None:
        raise ValueError("the transverse model needs a constant co-normal")
    w = np.asarray(w, dtype=np.float64)
    if np.any(w[1:] != 0) or w[0] == 0:
        raise ValueError(f"co-normal must be a multiple of e_1, got {w}")
    if w[0] == 1.0:
        return sigma.v
    return sigma.v.scaled(float(w[0]) ** sigma.r)


def check_support(v: VectorField, m: int, margin: float, samples: int = 41) -> float:
    """max |v| on the shell {some |x_i| >= 1 - margin}; raises if nonzero."""
    t = np.linspace(1.0 - margin, 1.0, 5)
    full = np.linspace(-1, 1, samples)
    worst = 0.0
    for i in range(m):
        for side in (-1, 1):
            axes = [full] * m
            axes[i] = side * t
            pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
            worst = max(worst, float(np.max(np.abs(np.atleast_2d(v.evaluate(pts))))))
    if worst > 0:
        raise SupportError(f"section is {worst:.3g} on the margin of width {margin:.4g} "
                           f"near the boundary of the cube")
    return worst


class TransverseModel:
    def __init__(self, v: VectorField, W: WiggleIsotopy, r: int, z=None):
        self.v, self.W, self.r, self.z = v, W, r, z
        self.m, self.n = W.m, v.n

    # -------------------------------------------------------------- g
    def g_poly(self, pts: np.ndarray, r: int, j=None) -> list[TruncatedPoly]:
        W = self.W
        X = TruncatedPoly.identity(pts, r)
        if j is None:
            j = np.rint(pts[:, 0] / (2.0 * W.delta))
        j = np.asarray(j, dtype=np.float64)
        sgn = np.where(np.mod(j, 2) == 0, 1.0, -1.0)
        arg = X[-1] * (4.0 / W.eps)
        eta = arg.compose_univariate(STEP.derivatives(arg.const, r))
        b = eta.scale(sgn * W.delta) + 2.0 * j * W.delta
        zero = TruncatedPoly.zeros(self.m, r, len(pts))
        inputs = [b] + list(X[1:-1]) + [zero]
        vals = self.v.jet(inputs)
        lin = (X[0] - b) ** self.r
        return [lin * c for c in vals]

    # -------------------------------------------------------------- f
    def f_jet(self, points, r: int | None = None) -> Jet:
        r = self.r if r is None else r
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        comps = [TruncatedPoly.zeros(self.m, r, len(pts)) for _ in range(self.n)]
        for s in range(0, len(pts), CHUNK):
            chunk = pts[s:s + CHUNK]
            phi, y = cutoff_phi_poly(self.W, chunk, r, self.z)
            live = np.abs(y[:, -1]) < 3.0 * self.W.eps / 16.0
            if not np.any(live):
                continue
            idx = np.nonzero(live)[0]
            g = self.g_poly(chunk[idx], r)
            ph = phi.take(idx)
            for c in range(self.n):
                comps[c].coeffs[:, s + idx] = (ph * g[c]).coeffs
        return Jet(pts, comps)

    def section(self) -> HolonomicSection:
        return HolonomicSection(lambda p, r: self.f_jet(p, r), self.m, self.n, self.r)


# ------------------------------------------------------------ sampling

def slab_points(W: WiggleIsotopy, per_delta: int, per_eps: int, other: int,
                xm_halfwidth: float | None = None) -> np.ndarray:
    """Grid over I^m restricted to |x_m| <= eps (where f can be nonzero)."""
    h = W.eps if xm_halfwidth is None else xm_halfwidth
    n1 = int(round(2.0 / W.delta * per_delta)) + 1
    nm = int(round(2.0 * h / W.eps * per_eps)) + 1
    axes = [np.linspace(-1, 1, n1)] + [np.linspace(-1, 1, other)] * (W.m - 2) + \
        [np.linspace(-h, h, nm)]
    return np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)


def uprime_points(W: WiggleIsotopy, per_delta: int, per_eps: int, other: int, z=None):
    """Samples of U' = F_1({|y_m| < eps/8}) as images of a y-grid."""
    n1 = int(round(2.0 / W.delta * per_delta)) + 1
    nm = max(int(round(0.25 * per_eps)), 2) + 1
    ym = np.linspace(-W.eps / 8, W.eps / 8, nm + 2)[1:-1]
    axes = [np.linspace(-1, 1, n1)] + [np.linspace(-1, 1, other)] * (W.m - 2) + [ym]
    y = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    return W(y, 1.0, z)


def cutoff_band_points(W: WiggleIsotopy, per_delta: int, other: int, across: int = 33,
                       z=None) -> np.ndarray:
    """F_1 of a y-grid across the cutoff transition eps/8 <= |y_m| <= 3 eps/16.

    The band is eps/16 wide, too thin for the uniform slab grid to resolve
    the peaks of the cutoff's derivatives.
    """
    n1 = int(round(2.0 / W.delta * per_delta)) + 1
    t = np.linspace(W.eps / 8, 3 * W.eps / 16, across)
    axes = [np.linspace(-1, 1, n1)] + [np.linspace(-1, 1, other)] * (W.m - 2) + \
        [np.concatenate([-t[::-1], t])]
    y = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    return W(y, 1.0, z)


def shell_points(m: int, margin: float, samples: int = 21) -> np.ndarray:
    t = np.linspace(1.0 - margin, 1.0, 4)
    full = np.linspace(-1, 1, samples)
    out = []
    for i in range(m):
        for side in (-1, 1):
            axes = [full] * m
            axes[i] = side * t
            out.append(np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1))
    return np.concatenate(out)


def _max_norm(jet: Jet, u=None):
    nrm = jet_norms(jet, u)
    c0 = float(np.max(nrm.c0, initial=0.0))
    perp = None if nrm.perp is None else float(np.max(nrm.perp, initial=0.0))
    return c0, perp


def jet_difference(a: Jet, b: Jet) -> Jet:
    return Jet(a.base, [p - q for p, q in zip(a.components, b.components)])


# ---------------------------------------------------------- measurements

def gluing_residual(model: TransverseModel, samples: int = 9) -> float:
    """max |j^r g_j - j^r g_{j+1}| at points of U near shared rectangle edges."""
    W = model.W
    edges = (2 * np.arange(-W.J, W.J) + 1) * W.delta
    offs = np.array([-1e-3, 0.0, 1e-3]) * W.delta
    ym = np.linspace(-3 * W.eps / 16, 3 * W.eps / 16, samples)
    others = [np.linspace(-1, 1, 5)] * (W.m - 2)
    axes = [(edges[:, None] + offs[None, :]).ravel()] + others + [ym]
    y = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    x = W(y, 1.0, model.z)
    jl = np.floor(x[:, 0] / (2 * W.delta) + 0.5)
    edge_idx = np.rint((x[:, 0] / W.delta - 1) / 2)
    worst = 0.0
    for s in range(0, len(x), CHUNK):
        xs = x[s:s + CHUNK]
        e = edge_idx[s:s + CHUNK]
        a = model.g_poly(xs, model.r, e)
        b = model.g_poly(xs, model.r, e + 1)
        for p, q in zip(a, b):
            worst = max(worst, float(np.max(np.abs(p.coeffs - q.coeffs), initial=0.0)))
    del jl
    return worst


def isotopy_checks(W: WiggleIsotopy, points: np.ndarray, z=None, shell=None) -> dict:
    """C^0 smallness, boundary identity and V-invariance of F_t."""
    disp = 0.0
    boundary_id = True
    v_invariant = True
    for t in TIMES:
        Ft = W(points, t, z)
        disp = max(disp, float(np.max(np.abs(Ft - points))))
        if shell is not None:
            boundary_id &= bool(np.all(W(shell, t, z) == shell))
        J = W.jet(points[:: max(1, len(points) // 5000)], 1, t, z)
        first = J.components[0]
        e1 = tuple([1] + [0] * (W.m - 1))
        rest = np.delete(first.coeffs, [0, first.basis.position[e1]], axis=0)
        v_invariant &= bool(np.all(first.derivative_value(e1) == 1.0) and np.all(rest == 0.0))
    return {"max_displacement": disp, "c0_small": disp < W.eps,
            "boundary_identity": boundary_id, "v_invariant": v_invariant}


def transverse_approximate(sigma: PrimitiveSection, k: int, eps: float, delta: float,
                           per_delta: int = 8, per_eps: int = 16, other: int = 17,
                           W: WiggleIsotopy | None = None, z=None, measure: bool = True,
                           norm_grid: int = 33) -> ApproximationResult:
    """Wiggle-and-interpolate approximation of a primitive section with co-normal e_1."""
    m, r = sigma.m, sigma.r
    if not 0 <= k < m:
        raise ValueError(f"need 0 <= k < m, got k={k}, m={m}")
    v = _e1_section(sigma)
    check_support(v, m, eps)
    if W is None:
        W = build_wiggle_isotopy(m, eps, delta)
    model = TransverseModel(v, W, r, z)
    res = ApproximationResult(
        model.section(), W, "transverse",
        params={"m": m, "n": sigma.n, "r": r, "k": k, "eps": W.eps, "delta": W.delta,
                "requested_delta": W.requested_delta, "amplitude": W.amplitude,
                "per_delta": per_delta, "per_eps": per_eps})
    res.model = model
    res.sigma = PrimitiveSection(v, np.eye(m)[0], r, m)
    res.grid_rule = {"per_delta": per_delta, "per_eps": per_eps, "other": other}
    glue = gluing_residual(model)
    if glue > 1e-10:
        raise StageError(0, f"gluing residual {glue:.3g} exceeds tolerance", {"gluing": glue})
    res.checks["gluing"] = True
    res.measurements["gluing_residual"] = glue
    if not measure:
        return res
    res.norms["sigma_cr"] = section_cr_norm(res.sigma, GridSpec.uniform(m, norm_grid))
    res.measurements.update(measure_transverse(model, sigma, per_delta, per_eps, other))
    shell = shell_points(m, OP_MARGIN * W.eps)
    iso = isotopy_checks(W, slab_points(W, 2, 4, 5), z, shell)
    res.measurements["max_displacement"] = iso.pop("max_displacement")
    res.checks.update(iso)
    fb = model.f_jet(shell)
    res.checks["boundary_vanishing"] = bool(all(np.all(p.coeffs == 0) for p in fb.components))
    return res


def measure_transverse(model: TransverseModel, sigma: PrimitiveSection,
                       per_delta: int, per_eps: int, other: int) -> dict:
    W = model.W
    e1 = np.eye(W.m)[0]
    up = uprime_points(W, per_delta, per_eps, other, model.z)
    c0 = 0.0
    for s in range(0, len(up), CHUNK):
        pts = up[s:s + CHUNK]
        diff = jet_difference(model.f_jet(pts), _sigma_jets(model, sigma, pts))
        c0 = max(c0, _max_norm(diff)[0])
    perp = 0.0
    slab = np.concatenate([slab_points(W, per_delta, per_eps, other),
                           cutoff_band_points(W, per_delta, other, 2 * per_eps + 1, model.z)])
    for s in range(0, len(slab), CHUNK):
        perp = max(perp, _max_norm(model.f_jet(slab[s:s + CHUNK]), e1)[1])
    return {"c0_error_uprime": c0, "perp_sup": perp,
            "uprime_samples": int(len(up)), "slab_samples": int(len(slab))}


def _sigma_jets(model: TransverseModel, sigma: PrimitiveSection, pts) -> Jet:
    if model.z is None:
        return sigma.evaluate(pts)
    return PrimitiveSection(model.v, np.eye(model.m)[0], model.r, model.m).evaluate(pts)


# ------------------------------------------------------------- parametric

def freeze_parameters(v: VectorField, m: int, z) -> VectorField:
    """v(x, z) with z fixed, as a field of x alone."""
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    xs = coords(m)
    inner = xs + [Expr.const(float(c)) for c in z]
    return VectorField([compose(c, inner) if c.n_vars() > 0 else c for c in v.components])


def parametric_transverse_approximate(v_family: VectorField, m: int, q: int, r: int, k: int,
                                      eps: float, delta: float, z_values,
                                      **kw) -> list[tuple[np.ndarray, ApproximationResult]]:
    """Per-z runs of the transverse model with the parameter plateau factors.

    ``v_family`` is a field of (x_1..x_m, z_1..z_q).  One isotopy family is
    shared; its amplitude carries prod T((1 - |z_j|)/eps).
    """
    if q < 1:
        raise ValueError("parametric runs need q >= 1")
    zs = [np.atleast_1d(np.asarray(z, dtype=np.float64)) for z in z_values]
    W = build_wiggle_isotopy(m, eps, delta, q=q, z_samples=zs)
    out = []
    for z in zs:
        if np.any(np.abs(z) > 1):
            raise ValueError(f"parameter {z} outside the unit cube")
        vz = freeze_parameters(v_family, m, z)
        if W.zfactor(z) < 1.0:
            # the wiggle is damped here, so the section has to be absent
            full = np.linspace(-1, 1, 41)
            pts = np.stack([g.ravel() for g in np.meshgrid(*[full] * m, indexing="ij")], axis=1)
            worst = float(np.max(np.abs(np.atleast_2d(vz.evaluate(pts)))))
            if worst > 0:
                raise SupportError(f"section is {worst:.3g} at parameter {z.tolist()}, where "
                                   f"the wiggle is damped; it must vanish for |z_j| > "
                                   f"{1 - 0.75 * eps:.4g}")
        sig = PrimitiveSection(vz, np.eye(m)[0], r, m)
        res = transverse_approximate(sig, k, eps, delta, W=W, z=z, **kw)
        res.params["z"] = z.tolist()
        zb = bool(np.any(np.abs(z) >= 1 - OP_MARGIN * eps))
        if zb:
            probe = slab_points(W, 2, 4, 5)
            fj = res.sigma_hat.evaluate(probe)
            res.checks["boundary_z_zero"] = bool(all(np.all(p.coeffs == 0) for p in fj.components))
            res.checks["boundary_z_identity"] = bool(np.all(W(probe, 1.0, z) == probe))
        out.append((z, res))
    return out
