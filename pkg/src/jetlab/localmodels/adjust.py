"""Transversality adjustment near a face that tau is almost tangent to.

With H the hyperplane through R^k x 0 closest to tau (unit normal n), the
approximation is h(x) = psi(<x, n>/delta) <x, n>^r v(x) with psi the 1/2..1
plateau.  No isotopy is involved.  Along H the jet of h is exactly
<y - x, n>^r v(x), so the error against sigma comes from the tilt between n
and the co-normal u plus the offset within the band |<x, n>| < delta.
"""
from __future__ import annotations

import numpy as np

from ..polyjet.grid import GridSpec
from ..polyjet.jet import Jet
from ..polyjet.ops import jet_norms, section_cr_norm
from ..polyjet.truncpoly import TruncatedPoly
from ..primitive import PrimitiveSection
from ..profiles import PLATEAU
from .result import ApproximationResult, HolonomicSection, IdentityIsotopy

MAX_ANGLE = np.pi / 4
# half-width of Op(I^k), in units of delta, on which the error is measured
BAND = 0.2
CHUNK = 40000


class AngleError(ValueError):
    def __init__(self, angle: float):
        super().__init__(f"angle between tau and H is {angle:.4g} >= pi/4; "
                         f"subdivide or use the transverse path")
        self.angle = angle


def adjusted_normal(u, k: int) -> np.ndarray:
    """Unit normal of the hyperplane through R^k x 0 closest to ker <u, .>.

    Oriented so that <u, n> > 0.
    """
    u = np.asarray(u, dtype=np.float64)
    n = u.copy()
    n[:k] = 0.0
    nrm = np.linalg.norm(n)
    if nrm == 0:
        raise AngleError(np.pi / 2)
    return n / nrm


class AdjustModel:
    def __init__(self, v, normal: np.ndarray, r: int, delta: float):
        self.v, self.normal, self.r, self.delta = v, normal, r, delta
        self.m, self.n = len(normal), v.n

    def h_jet(self, points, r: int | None = None) -> Jet:
        r = self.r if r is None else r
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        comps = [TruncatedPoly.zeros(self.m, r, len(pts)) for _ in range(self.n)]
        t_all = pts @ self.normal
        live = np.nonzero(np.abs(t_all) < self.delta)[0]
        for s in range(0, len(live), CHUNK):
            idx = live[s:s + CHUNK]
            X = TruncatedPoly.identity(pts[idx], r)
            t = X[0] * self.normal[0]
            for i in range(1, self.m):
                t = t + X[i] * self.normal[i]
            arg = t / self.delta
            psi = arg.compose_univariate(PLATEAU.derivatives(arg.const, r))
            lead = psi * t ** self.r
            for c, vc in enumerate(self.v.jet(X)):
                comps[c].coeffs[:, idx] = (lead * vc).coeffs
        return Jet(pts, comps)

    def section(self) -> HolonomicSection:
        return HolonomicSection(lambda p, r: self.h_jet(p, r), self.m, self.n, self.r)


def band_points(normal: np.ndarray, k: int, half_width: float, per_axis: int = 41,
                across: int = 9, other: int = 3) -> np.ndarray:
    """Samples of {p + s : p in I^k x 0, s in H-complement of R^k or along n, |s| <= w}."""
    m = len(normal)
    base = [np.linspace(-1, 1, per_axis)] * k
    # directions inside H orthogonal to R^k: null space of n within the last m - k axes
    _, _, vt = np.linalg.svd(normal[None, k:])
    dirs = []
    for row in vt[1:]:
        d = np.zeros(m)
        d[k:] = row
        dirs.append(d)
    axes = base + [np.linspace(-half_width, half_width, across)] + \
        [np.linspace(-half_width, half_width, other)] * len(dirs)
    grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    pts = np.zeros((len(grid), m))
    pts[:, :k] = grid[:, :k]
    pts += grid[:, k:k + 1] * normal
    for j, d in enumerate(dirs):
        pts += grid[:, k + 1 + j:k + 2 + j] * d
    return pts[np.all(np.abs(pts) <= 1, axis=1)]


def cube_band_points(normal: np.ndarray, delta: float, per_axis: int = 41,
                     across: int = 33) -> np.ndarray:
    """Samples of I^m refined across the support band |<x, n>| < delta."""
    m = len(normal)
    g = np.stack([a.ravel() for a in np.meshgrid(*[np.linspace(-1, 1, per_axis)] * m,
                                                  indexing="ij")], axis=1)
    foot = g - np.outer(g @ normal, normal)
    foot = np.unique(np.round(foot, 12), axis=0)
    ts = np.linspace(-delta, delta, across)
    pts = (foot[:, None, :] + ts[None, :, None] * normal).reshape(-1, m)
    pts = pts[np.all(np.abs(pts) <= 1, axis=1)]
    return np.concatenate([g, pts])


def transversality_adjust(sigma: PrimitiveSection, delta: float, k: int,
                          band: float = BAND, per_axis: int = 41,
                          norm_grid: int = 21, measure: bool = True) -> ApproximationResult:
    """holonomic approximation of sigma near I^k x 0 when tau is almost tangent to it."""
    m, r = sigma.m, sigma.r
    if not 0 <= k < m:
        raise ValueError(f"need 0 <= k < m, got k={k}, m={m}")
    if not delta > 0:
        raise ValueError("delta must be positive")
    sig = sigma.normalized()
    u = np.asarray(sig.constant_conormal, dtype=np.float64)
    n = adjusted_normal(u, k)
    angle = float(np.arccos(np.clip(u @ n, -1.0, 1.0)))
    if angle >= MAX_ANGLE:
        raise AngleError(angle)
    model = AdjustModel(sig.v, n, r, delta)
    res = ApproximationResult(
        model.section(), IdentityIsotopy(m), "tangent",
        params={"m": m, "n": sig.n, "r": r, "k": k, "delta": delta, "band": band,
                "normal": n, "conormal": u, "angle": angle})
    res.model = model
    res.sigma = sig
    res.grid_rule = {"per_axis": per_axis}
    if not measure:
        return res
    norm = section_cr_norm(sig, GridSpec.uniform(m, norm_grid))
    res.norms["sigma_cr"] = norm
    near = band_points(n, k, band * delta, per_axis)
    dist = 0.0
    for s in range(0, len(near), CHUNK):
        p = near[s:s + CHUNK]
        a, b = model.h_jet(p), sig.evaluate(p)
        diff = Jet(p, [x - y for x, y in zip(a.components, b.components)])
        dist = max(dist, float(np.max(jet_norms(diff).c0, initial=0.0)))
    perp = 0.0
    cube = cube_band_points(n, delta, per_axis)
    for s in range(0, len(cube), CHUNK):
        nr = jet_norms(model.h_jet(cube[s:s + CHUNK]), u)
        perp = max(perp, float(np.max(nr.perp, initial=0.0)))
    scale = norm * (angle + delta)
    res.measurements.update({
        "dist_near_face": dist, "perp_sup": perp, "band_samples": int(len(near)),
        "ratio_dist": dist / scale if scale > 0 else 0.0,
        "ratio_perp": perp / scale if scale > 0 else 0.0})
    far = cube[np.abs(cube @ n) >= delta]
    hf = model.h_jet(far[: min(len(far), 5000)])
    res.checks["support_band"] = bool(all(np.all(p.coeffs == 0) for p in hf.components))
    return res
