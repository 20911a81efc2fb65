"""Operations on jets: evaluation, linear structure, composition, norms."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .grid import GridSpec
from .jet import Jet
from .multiindex import basis
from .section import JetSection, taylor_jets
from .truncpoly import TruncatedPoly, as_exact


def taylor_evaluate(f, x, r: int, exact: bool = False) -> Jet:
    """j^r(f)(x) for an expression or vector field ``f``."""
    if exact:
        x = np.vectorize(as_exact, otypes=[object])(np.asarray(x, dtype=object))
    return taylor_jets(f, x, r, exact)


def jet_combine(a: Jet, b: Jet, lam=1, mu=1) -> Jet:
    """lam * a + mu * b at a common base."""
    if (a.m, a.n, a.r) != (b.m, b.n, b.r):
        raise ValueError(f"shape mismatch: {a} vs {b}")
    if a.batch != b.batch or not _same_base(a.base, b.base):
        raise ValueError("jets have different base points")
    comps = [p.scale(lam) + q.scale(mu) for p, q in zip(a.components, b.components)]
    return Jet(a.base, comps)


def _same_base(x, y, tol=1e-12) -> bool:
    if x.dtype == object and y.dtype == object:
        return bool(np.all(x == y))
    return bool(np.max(np.abs(x.astype(np.float64) - y.astype(np.float64)), initial=0.0) <= tol)


def jet_project(s: Jet, l: int) -> Jet:
    """Forget the homogeneous parts of degree > l."""
    if not 0 <= l <= s.r:
        raise ValueError(f"cannot project an order-{s.r} jet to order {l}")
    return Jet(s.base, [p.truncate(l) for p in s.components])


def jet_values(s: Jet) -> np.ndarray:
    """Constant terms, shape (B, n)."""
    return np.stack([p.const for p in s.components], axis=1)


def jet_compose(outer: Jet, inner, tol: float = 1e-9) -> Jet:
    """j^r(h o F)(x) from outer = j^r(h)(F(x)) and inner = j^r(F)(x).

    ``inner`` is a Jet with ``outer.m`` components or a list of scalar jets.
    """
    if isinstance(inner, Jet):
        comps, base = inner.components, inner.base
    else:
        comps = [c for j in inner for c in j.components]
        base = inner[0].base
        for j in inner[1:]:
            if not _same_base(j.base, base):
                raise ValueError("inner jets must share a base point")
    if len(comps) != outer.m:
        raise ValueError(f"outer has m={outer.m} but {len(comps)} inner components")
    if comps[0].r != outer.r:
        raise ValueError("outer and inner jets must have the same order")
    values = np.stack([p.const for p in comps], axis=1)
    if outer.batch not in (1, len(values)):
        raise ValueError("batch mismatch between outer and inner")
    ob = outer.base if outer.batch == len(values) else np.repeat(outer.base, len(values), axis=0)
    if outer.exact and comps[0].exact and tol == 0:
        ok = bool(np.all(ob == values))
    else:
        ok = np.max(np.abs(ob.astype(np.float64) - values.astype(np.float64)), initial=0.0) <= tol
    if not ok:
        raise ValueError("outer base does not match the inner value")
    shifted = [p - p.const for p in comps]
    out = [q.substitute(shifted) for q in outer.components]
    return Jet(base, out)


# ------------------------------------------------------------- linear maps

def jacobian(F: Jet) -> np.ndarray:
    """First derivatives as (B, n, m)."""
    J = np.empty((F.batch, F.n, F.m), dtype=object if F.exact else np.float64)
    for i, p in enumerate(F.components):
        for j in range(F.m):
            e = [0] * F.m
            e[j] = 1
            J[:, i, j] = p.coeffs[p.basis.position[tuple(e)]]
    return J


def _exact_inverse(A):
    n = len(A)
    M = [[as_exact(A[i][j]) for j in range(n)] + [Fraction(int(i == j)) for j in range(n)]
         for i in range(n)]
    for c in range(n):
        piv = next((i for i in range(c, n) if M[i][c] != 0), None)
        if piv is None:
            raise np.linalg.LinAlgError("singular matrix")
        M[c], M[piv] = M[piv], M[c]
        pv = M[c][c]
        M[c] = [v / pv for v in M[c]]
        for i in range(n):
            if i != c and M[i][c] != 0:
                f = M[i][c]
                M[i] = [a - f * b for a, b in zip(M[i], M[c])]
    return np.array([row[n:] for row in M], dtype=object)


def batch_inverse(A: np.ndarray, cond_limit: float = 1e12) -> np.ndarray:
    if A.dtype == object:
        return np.stack([_exact_inverse(a) for a in A])
    if np.any(np.linalg.cond(A) > cond_limit):
        raise np.linalg.LinAlgError("Jacobian is singular at a sample point")
    return np.linalg.inv(A)


def apply_matrix(M: np.ndarray, polys: list[TruncatedPoly]) -> list[TruncatedPoly]:
    """out_i = sum_j M[:, i, j] * polys_j, per batch column."""
    out = []
    for i in range(M.shape[1]):
        acc = polys[0].scale(M[:, i, 0])
        for j in range(1, M.shape[2]):
            acc = acc + polys[j].scale(M[:, i, j])
        out.append(acc)
    return out


def jet_inverse(F: Jet) -> Jet:
    """Jet of F^{-1} at F(x), given the jet of a local diffeomorphism F at x.

    Newton iteration in jet space: each step at least doubles the number of
    correct orders, so r steps are plenty.
    """
    if F.n != F.m:
        raise ValueError("only square maps can be inverted")
    m, r = F.m, F.r
    y = jet_values(F)
    Ainv = batch_inverse(jacobian(F))
    Z = TruncatedPoly.identity(np.zeros_like(y) if not F.exact else
                               np.full(y.shape, Fraction(0), dtype=object), r, F.exact)
    Z = [z.broadcast(F.batch) for z in Z]
    G = [zi + xi for zi, xi in zip(apply_matrix(Ainv, Z), F.base.T)]
    for _ in range(max(r, 1)):
        FG = jet_compose(F, Jet(y, G), tol=np.inf).components
        R = [fg - z - yi for fg, z, yi in zip(FG, Z, y.T)]
        corr = apply_matrix(Ainv, R)
        G = [g - c for g, c in zip(G, corr)]
    return Jet(y, G)


# ------------------------------------------------------------------ norms

@dataclass
class JetNorms:
    c0: np.ndarray | float
    perp: np.ndarray | float | None = None


def _unit_check(u, m: int, tol: float) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if u.shape[-1] != m:
        raise ValueError(f"co-normal has dimension {u.shape[-1]}, expected {m}")
    nrm = np.linalg.norm(u, axis=-1)
    if np.any(np.abs(nrm - 1.0) > tol):
        raise ValueError(f"co-normal must be a unit vector (norm {nrm})")
    return u


def jet_norms(s: Jet, u=None, tol: float = 1e-9) -> JetNorms:
    """c0 = max_alpha |D_alpha|; perp = max_{|alpha|<r} |grad D_alpha restricted to u^perp|.

    Norms across outputs are Euclidean; the restricted gradient of a
    vector-valued D_alpha is measured in the spectral norm.
    """
    D = s.derivative_array().astype(np.float64)  # (n, P, B)
    c0 = np.max(np.linalg.norm(D, axis=0), axis=0)
    perp = None
    if u is not None:
        b = s.basis
        u = _unit_check(u, s.m, tol)
        U = np.broadcast_to(u, (s.batch, s.m))
        Pt = np.eye(s.m)[None] - U[:, :, None] * U[:, None, :]
        perp = np.zeros(s.batch)
        for k, alpha in enumerate(b.indices):
            if b.orders[k] >= s.r:
                break
            G = np.empty((s.batch, s.n, s.m))
            for i in range(s.m):
                up = list(alpha)
                up[i] += 1
                G[:, :, i] = D[:, b.position[tuple(up)], :].T
            proj = G @ Pt
            perp = np.maximum(perp, np.linalg.norm(proj, ord=2, axis=(1, 2)))
    if s.batch == 1:
        return JetNorms(float(c0[0]), None if perp is None else float(perp[0]))
    return JetNorms(c0, perp)


def section_cr_norm(sigma, grid: GridSpec, chunk: int = 512) -> float:
    """C^r norm of a primitive section via its two-point germ family.

    ``sigma`` needs ``m``, ``r``, ``v`` (VectorField) and
    ``conormal_jets(xs)`` returning the co-normal components as polynomials.  h(x, y) = <y - x, u_x>^r v(x) is expanded at (x, x)
    in 2m variables to order 2r; the norm is the max over |a|, |b| <= r of
    |d_x^b d_y^a h|.
    """
    grid.check_resolution()
    m, r = sigma.m, sigma.r
    pts = grid.points()
    big = basis(2 * m, 2 * r)
    keep = np.array([sum(a[:m]) <= r and sum(a[m:]) <= r for a in big.indices])
    fac = np.array(big.factorials, dtype=np.float64)[keep]
    best = 0.0
    for start in range(0, len(pts), chunk):
        P = pts[start:start + chunk]
        doubled = np.concatenate([P, P], axis=1)
        ident = TruncatedPoly.identity(doubled, 2 * r)
        xs, ys = ident[:m], ident[m:]
        u = sigma.conormal_jets(xs)
        lin = (ys[0] - xs[0]) * u[0]
        for i in range(1, m):
            lin = lin + (ys[i] - xs[i]) * u[i]
        powr = lin ** r
        vals = sigma.v.jet(xs)
        D = np.stack([(powr * vc).coeffs[keep] * fac[:, None] for vc in vals])
        best = max(best, float(np.max(np.linalg.norm(D, axis=0), initial=0.0)))
    return best


# ----------------------------------------------------------- holonomy

@dataclass
class HolonomyDefect:
    field: np.ndarray          # grid-shaped maxima
    boundary: np.ndarray       # True where one-sided stencils were used
    interior_max: float
    overall_max: float


def holonomy_defect(section: JetSection, grid: GridSpec) -> HolonomyDefect:
    """Cartan-compatibility residual |d_i D_alpha - D_{alpha+e_i}| on a grid.

    Derivatives along the grid use second-order central differences with the
    grid step, falling back to one-sided second-order stencils on the
    boundary samples (flagged in ``boundary``).
    """
    if any(c < 3 for c in grid.counts):
        raise ValueError("holonomy_defect needs at least 3 samples per axis")
    jets = section.evaluate(grid.points())
    D = jets.derivative_array().astype(np.float64)  # (n, P, N)
    n, P, _ = D.shape
    D = D.reshape((n, P) + grid.shape)
    b = jets.basis
    steps = grid.steps
    out = np.zeros(grid.shape)
    for k, alpha in enumerate(b.indices):
        if b.orders[k] >= jets.r:
            break
        for i in range(jets.m):
            up = list(alpha)
            up[i] += 1
            target = D[:, b.position[tuple(up)]]
            fd = np.gradient(D[:, k], steps[i], axis=1 + i, edge_order=2)
            out = np.maximum(out, np.max(np.abs(fd - target), axis=0))
    boundary = np.zeros(grid.shape, dtype=bool)
    for i in range(grid.m):
        sl = [slice(None)] * grid.m
        sl[i] = 0
        boundary[tuple(sl)] = True
        sl[i] = -1
        boundary[tuple(sl)] = True
    interior = out[~boundary]
    return HolonomyDefect(out, boundary, float(np.max(interior, initial=0.0)),
                          float(np.max(out, initial=0.0)))

