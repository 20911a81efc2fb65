"""Primitive sections, power-sum decomposition and jet pullback/pushforward.

A primitive section is x -> j^r_x[ y -> <y - x, w_x>^r v(x) ]: a pure r-th
power of a linear form whose kernel is the hyperplane w_x^perp.  A top-order
section is a field of homogeneous degree-r polynomials

    p(X) = sum over unordered alpha of a_alpha(x) X_{alpha_1} ... X_{alpha_r},

and the power-sum identity

    X_1 ... X_r = (-1)^r / r! * sum_{U subset {1..r}} (-1)^{|U|} (sum_{u in U} X_u)^r

rewrites it as a finite sum of primitive sections with constant integer
co-normals w_beta = e_{beta_1} + ... + e_{beta_k}.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import factorial, gcd

import numpy as np

from .lingeo import HyperplaneField
from .polyjet.expression import Expr, VectorField
from .polyjet.jet import Jet
from .polyjet.multiindex import basis, from_multiset, to_multiset
from .polyjet.ops import batch_inverse, jacobian, jet_compose, jet_inverse, jet_values
from .polyjet.section import JetSection, taylor_jets
from .polyjet.truncpoly import TruncatedPoly, as_exact


# ------------------------------------------------------------ sections

class PrimitiveSection(JetSection):
    """x -> jet of <y - x, w_x>^r v(x).

    ``conormal`` is a constant vector (any nonzero length; it enters the germ
    as given) or a :class:`HyperplaneField`.  ``weights`` optionally records
    v as an exact linear combination of named coefficient fields.
    """

    def __init__(self, v, conormal, r: int, m: int | None = None,
                 weights: dict | None = None, label=None):
        self.v = v if isinstance(v, VectorField) else VectorField(v)
        if isinstance(conormal, HyperplaneField):
            self.tau = conormal
        else:
            self.tau = HyperplaneField(np.asarray(conormal))
        self.m = m or self.tau.m
        if self.tau.m != self.m:
            raise ValueError("co-normal dimension does not match m")
        if self.v.n_vars() > self.m:
            raise ValueError(f"v uses {self.v.n_vars()} variables, m={self.m}")
        self.n = self.v.n
        self.r = r
        self.weights = weights
        self.label = label

    @property
    def constant_conormal(self) -> np.ndarray | None:
        return None if self.tau.constant is None else self.tau.constant

    def conormal_jets(self, xs):
        return self.tau.jets(xs)

    def unit_conormal(self, points) -> np.ndarray:
        return self.tau.at(points)

    def normalized(self) -> "PrimitiveSection":
        """Same section with a unit constant co-normal (float; v rescaled by |w|^r)."""
        w = self.constant_conormal
        if w is None:
            raise ValueError("normalization needs a constant co-normal")
        nrm = float(np.linalg.norm(np.asarray(w, dtype=np.float64)))
        if abs(nrm - 1.0) < 1e-15:
            return self
        return PrimitiveSection(self.v.scaled(nrm ** self.r), np.asarray(w, float) / nrm,
                                self.r, self.m, self.weights, self.label)

    def evaluate(self, points, exact: bool = False) -> Jet:
        if exact:
            pts = np.vectorize(as_exact, otypes=[object])(
                np.atleast_2d(np.asarray(points, dtype=object)))
        else:
            pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        B = len(pts)
        if self.tau.constant is not None:
            # the same homogeneous polynomial at every base point
            w = tuple(as_exact(c) if exact else float(c) for c in self.tau.constant)
            power = _linear_power(w, self.r, exact).broadcast(B)
        else:
            u = self.tau.raw(pts)
            if np.any(np.all(u == 0, axis=1)):
                raise ValueError("co-normal vanishes at a sample point")
            X = TruncatedPoly.identity(np.zeros(pts.shape), self.r)
            lin = X[0].broadcast(B).scale(u[:, 0])
            for i in range(1, self.m):
                lin = lin + X[i].broadcast(B).scale(u[:, i])
            power = lin ** self.r
        vals = _field_values(self.v, pts, exact)
        return Jet(pts, [power.scale(vals[:, c]) for c in range(self.n)])

    def with_v(self, v) -> "PrimitiveSection":
        cn = self.tau if self.tau.constant is None else self.tau.constant
        return PrimitiveSection(v, cn, self.r, self.m, None, self.label)

    def to_json(self) -> dict:
        out = {"r": self.r, "m": self.m, "n": self.n, "conormal": self.tau.to_json(),
               "v": self.v.to_json()}
        if self.label is not None:
            out["beta"] = [int(b) + 1 for b in self.label]
        if self.weights is not None:
            out["v_coefficients"] = [
                {"alpha": [int(a) + 1 for a in alpha], "coefficient": _frac_str(c)}
                for alpha, c in self.weights.items()]
        return out


@lru_cache(maxsize=256)
def _linear_power(w: tuple, r: int, exact: bool) -> TruncatedPoly:
    """<X, w>^r at a single base point."""
    if all(c == 0 for c in w):
        raise ValueError("co-normal vanishes")
    zero = np.full((1, len(w)), Fraction(0), dtype=object) if exact else np.zeros((1, len(w)))
    X = TruncatedPoly.identity(zero, r, exact)
    lin = X[0].scale(w[0])
    for i in range(1, len(w)):
        lin = lin + X[i].scale(w[i])
    return lin ** r


def _frac_str(c) -> str:
    c = as_exact(c)
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _field_values(v: VectorField, pts, exact: bool) -> np.ndarray:
    if exact:
        ident = TruncatedPoly.identity(pts, 0, True)
        return np.stack([p.const for p in v.jet(ident)], axis=1)
    return np.atleast_2d(v.evaluate(pts)).reshape(len(pts), v.n)


def primitive_section_jet(sigma: PrimitiveSection, x, exact: bool = False) -> Jet:
    return sigma.evaluate(x, exact)


class TopOrderSection(JetSection):
    """sigma with sigma^(r-1) = 0, given by coefficient fields a_alpha.

    Keys of ``coeffs`` are unordered multi-indices as sorted tuples of
    variable indices (0-based) of length r; missing keys mean zero.
    """

    def __init__(self, m: int, r: int, coeffs: dict, n: int | None = None):
        if r < 1:
            raise ValueError("top-order sections need r >= 1")
        self.m, self.r = m, r
        self.coeffs = {}
        for alpha, a in coeffs.items():
            key = tuple(sorted(int(i) for i in alpha))
            if len(key) != r or any(not 0 <= i < m for i in key):
                raise ValueError(f"bad multi-index {alpha} for m={m}, r={r}")
            vf = a if isinstance(a, VectorField) else VectorField(
                a if isinstance(a, Expr) else [Expr.const(c) for c in np.atleast_1d(a)])
            self.coeffs[key] = vf
        ns = {vf.n for vf in self.coeffs.values()}
        if len(ns) > 1:
            raise ValueError("all coefficient fields need the same number of outputs")
        self.n = ns.pop() if ns else (n or 1)

    @classmethod
    def from_polynomial(cls, m: int, r: int, terms: dict, amplitude: Expr | None = None):
        """From {exponent tuple: rational coefficient}, optionally times a field."""
        coeffs = {}
        for e, c in terms.items():
            if sum(e) != r:
                raise ValueError(f"monomial {e} is not of degree {r}")
            c = as_exact(c)
            if c == 0:
                continue
            ex = Expr.const(c) if amplitude is None else Expr.const(c) * amplitude
            coeffs[to_multiset(e)] = VectorField(ex)
        return cls(m, r, coeffs)

    def evaluate(self, points, exact: bool = False) -> Jet:
        pts = np.atleast_2d(np.asarray(points, dtype=object if exact else np.float64))
        if exact:
            pts = np.vectorize(as_exact, otypes=[object])(pts)
        comps = [TruncatedPoly.zeros(self.m, self.r, len(pts), exact) for _ in range(self.n)]
        b = basis(self.m, self.r)
        for alpha, vf in self.coeffs.items():
            vals = _field_values(vf, pts, exact)
            slot = b.position[from_multiset(alpha, self.m)]
            for c in range(self.n):
                comps[c].coeffs[slot] = comps[c].coeffs[slot] + vals[:, c]
        return Jet(pts, comps)

    def to_json(self) -> dict:
        return {"m": self.m, "r": self.r, "n": self.n,
                "coeffs": [{"alpha": [i + 1 for i in a], "field": vf.to_json()}
                           for a, vf in sorted(self.coeffs.items())]}


# ------------------------------------------------------- decomposition

@lru_cache(maxsize=None)
def _power_sum(beta: tuple, m: int, r: int) -> TruncatedPoly:
    X = TruncatedPoly.identity(np.full((1, m), Fraction(0), dtype=object), r, exact=True)
    lin = X[beta[0]]
    for b in beta[1:]:
        lin = lin + X[b]
    return lin ** r


def power_sum_expand(beta, r: int, m: int | None = None) -> TruncatedPoly:
    """(X_{beta_1} + ... + X_{beta_k})^r as an exact polynomial (0-based indices)."""
    beta = tuple(int(b) for b in beta)
    if not beta or len(beta) > r:
        raise ValueError(f"need 1 <= |beta| <= r, got {len(beta)}")
    m = m or (max(beta) + 1)
    if min(beta) < 0 or max(beta) >= m:
        raise ValueError(f"indices {beta} out of range for m={m}")
    return _power_sum(tuple(beta), m, r).copy()


def beta_terms(m: int, r: int) -> list[tuple[int, ...]]:
    """All unordered beta of size 1..r over m variables, in a fixed order."""
    out = []
    for k in range(1, r + 1):
        out.extend(itertools.combinations_with_replacement(range(m), k))
    return out


@lru_cache(maxsize=None)
def decomposition_weights(m: int, r: int) -> dict:
    """{beta: {alpha: coefficient}} with v_beta = sum_alpha coefficient * a_alpha."""
    table = {beta: {} for beta in beta_terms(m, r)}
    rf = factorial(r)
    for alpha in itertools.combinations_with_replacement(range(m), r):
        for size in range(1, r + 1):
            sign = Fraction((-1) ** (r + size), rf)
            for U in itertools.combinations(range(r), size):
                beta = tuple(sorted(alpha[u] for u in U))
                row = table[beta]
                row[alpha] = row.get(alpha, Fraction(0)) + sign
    return {b: {a: c for a, c in row.items() if c != 0} for b, row in table.items()}


def beta_conormal(beta, m: int) -> np.ndarray:
    w = np.zeros(m, dtype=np.int64)
    for b in beta:
        w[b] += 1
    return w


def decompose_top_order(sigma: TopOrderSection) -> list[PrimitiveSection]:
    """One primitive section per beta; the count depends only on (m, r)."""
    table = decomposition_weights(sigma.m, sigma.r)
    out = []
    for beta, row in table.items():
        weights = {a: c for a, c in row.items() if a in sigma.coeffs}
        parts = []
        for c in range(sigma.n):
            terms = [Expr.const(w) * sigma.coeffs[a].components[c] for a, w in weights.items()]
            if not terms:
                parts.append(Expr.const(0))
            elif len(terms) == 1:
                parts.append(terms[0])
            else:
                parts.append(Expr("add", tuple(terms)))
        out.append(PrimitiveSection(VectorField(parts), beta_conormal(beta, sigma.m), sigma.r,
                                    sigma.m, weights, beta))
    return out


def merge_redundant(terms: list[PrimitiveSection]) -> list[PrimitiveSection]:
    """Group terms by primitive integer direction and drop identically zero ones.

    A term with co-normal w = g * d (d primitive, g = gcd) equals the term with
    co-normal d and v scaled by g^r.  Zero detection uses the exact weights.
    """
    groups: dict = {}
    for t in terms:
        w = t.constant_conormal
        if w is None or t.weights is None:
            raise ValueError("merging needs constant integer co-normals with weights")
        if not t.weights:
            continue
        w = np.asarray(w, dtype=np.int64)
        g = 0
        for c in w:
            g = gcd(g, int(c))
        d = tuple(int(c) // g for c in w)
        scale = Fraction(g) ** t.r
        entry = groups.setdefault(d, {"weights": {}, "parts": [], "r": t.r, "m": t.m, "n": t.n})
        for a, c in t.weights.items():
            entry["weights"][a] = entry["weights"].get(a, Fraction(0)) + c * scale
        entry["parts"].append((scale, t.v))
    out = []
    for d, e in groups.items():
        weights = {a: c for a, c in e["weights"].items() if c != 0}
        if not weights:
            continue
        comps = []
        for c in range(e["n"]):
            summands = [Expr.const(s) * v.components[c] for s, v in e["parts"]]
            comps.append(summands[0] if len(summands) == 1 else Expr("add", tuple(summands)))
        label = tuple(i for i, k in enumerate(d) for _ in range(k))
        out.append(PrimitiveSection(VectorField(comps), np.array(d), e["r"], e["m"], weights, label))
    return out


def recombine(terms: list[JetSection], points, exact: bool = False) -> Jet:
    """Sum of the jets of several sections at the same points."""
    jets = [t.evaluate(points, exact) for t in terms]
    comps = jets[0].components
    for j in jets[1:]:
        comps = [p + q for p, q in zip(comps, j.components)]
    return Jet(jets[0].base, comps)


def weight_residual(sigma_coeffs: dict, m: int, r: int) -> TruncatedPoly:
    """Exact residual sum_beta v_beta (X . w_beta)^r - sum_alpha a_alpha X^alpha
    for constant rational coefficients {alpha: a}."""
    table = decomposition_weights(m, r)
    res = TruncatedPoly.zeros(m, r, 1, exact=True)
    for beta, row in table.items():
        v = sum((c * as_exact(sigma_coeffs[a]) for a, c in row.items() if a in sigma_coeffs),
                Fraction(0))
        if v:
            res = res + _power_sum(beta, m, r).scale(v)
    b = basis(m, r)
    for alpha, a in sigma_coeffs.items():
        slot = b.position[from_multiset(alpha, m)]
        res.coeffs[slot, 0] -= as_exact(a)
    return res


# ---------------------------------------------------------- diffeos

class Diffeo:
    """A diffeomorphism given by coordinate expressions, optionally with its inverse."""

    def __init__(self, forward, inverse=None, box=None):
        self.forward = forward if isinstance(forward, VectorField) else VectorField(forward)
        self.inverse = None if inverse is None else (
            inverse if isinstance(inverse, VectorField) else VectorField(inverse))
        self.m = self.forward.n
        self.box = box or ((-1.0,) * self.m, (1.0,) * self.m)

    def __call__(self, points) -> np.ndarray:
        return np.atleast_2d(self.forward.evaluate(np.atleast_2d(points)))

    def jet(self, points, r: int, exact: bool = False) -> Jet:
        if exact:
            points = np.vectorize(as_exact, otypes=[object])(
                np.atleast_2d(np.asarray(points, dtype=object)))
        return taylor_jets(self.forward, points, r, exact)

    def invert(self, values, tol: float = 1e-13, maxit: int = 50) -> np.ndarray:
        """F^{-1} at values: closed form if known, else Newton from the identity guess."""
        y = np.atleast_2d(np.asarray(values, dtype=np.float64))
        if self.inverse is not None:
            return np.atleast_2d(self.inverse.evaluate(y))
        x = y.copy()
        for _ in range(maxit):
            J = self.jet(x, 1)
            res = jet_values(J) - y
            if np.max(np.abs(res)) < tol:
                break
            x = x - np.einsum("bij,bj->bi", batch_inverse(jacobian(J)), res)
        else:
            raise RuntimeError("Newton inversion did not converge")
        return x

    def inverse_jet(self, points, r: int, exact: bool = False) -> Jet:
        """Jet of F^{-1} at the given points (in the target)."""
        if self.inverse is not None:
            if exact:
                points = np.vectorize(as_exact, otypes=[object])(
                    np.atleast_2d(np.asarray(points, dtype=object)))
            return taylor_jets(self.inverse, points, r, exact)
        x = self.invert(points)
        return jet_inverse(self.jet(x, r))

    def check(self, points, tol: float = 1e-9) -> float:
        """max |F(F^{-1}(y)) - y| on samples; raises if the Jacobian degenerates."""
        y = np.atleast_2d(points)
        x = self.invert(y)
        batch_inverse(jacobian(self.jet(x, 1)))
        err = float(np.max(np.abs(self(x) - y)))
        if err > tol:
            raise ValueError(f"F o F^-1 deviates from the identity by {err:.3g}")
        return err


def jet_pullback(F: Diffeo, s: Jet, x=None, tol: float = 1e-9) -> Jet:
    """F^* s: the jet at x of h o F, where s = j^r(h)(F(x))."""
    if x is None:
        if s.exact:
            if F.inverse is None:
                raise ValueError("exact pullback needs a closed-form inverse")
            x = jet_values(taylor_jets(F.inverse, s.base, 0, True))
        else:
            x = F.invert(s.base.astype(np.float64))
    Fj = F.jet(x, s.r, s.exact)
    J = jacobian(Fj)
    if J.dtype != object and np.any(np.abs(np.linalg.det(J)) < 1e-12):
        raise np.linalg.LinAlgError("Jacobian of F is singular at the base point")
    return jet_compose(s, Fj, tol=0 if (s.exact and Fj.exact) else tol)


def jet_pushforward(F: Diffeo, s: Jet, tol: float = 1e-9) -> Jet:
    """F_* s = (F^{-1})^* s: the jet at F(x) of h o F^{-1}, where s = j^r(h)(x)."""
    if s.exact:
        y = jet_values(F.jet(s.base, 0, True))
        inv = F.inverse_jet(y, s.r, True)
    else:
        y = F(s.base.astype(np.float64))
        inv = F.inverse_jet(y, s.r)
    return jet_compose(s, inv, tol=0 if s.exact else tol)


@dataclass
class DecompositionReport:
    terms: list[PrimitiveSection]
    merged: list[PrimitiveSection] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"terms": [t.to_json() for t in self.terms],
                "merged": [t.to_json() for t in self.merged]}
