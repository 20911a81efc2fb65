"""Jets: a base point plus one truncated Taylor polynomial per output.

A :class:`Jet` may be batched: ``base`` has shape ``(B, m)`` and every
component polynomial carries ``B`` columns.  Component polynomials are in
the shifted variable ``X = y - base``.
"""
from __future__ import annotations

import json

import numpy as np

from .multiindex import MultiIndex, basis
from .truncpoly import TruncatedPoly, as_exact


class Jet:
    __slots__ = ("base", "components")

    def __init__(self, base, components: list[TruncatedPoly]):
        if not components:
            raise ValueError("a jet needs at least one component")
        first = components[0]
        for p in components[1:]:
            if p.basis is not first.basis or p.exact != first.exact:
                raise ValueError("jet components must share (m, r, scalar mode)")
        batch = max(p.batch for p in components)
        components = [p.broadcast(batch) for p in components]
        b = np.asarray(base, dtype=object if first.exact else np.float64)
        if b.ndim == 1:
            b = b[None, :]
        if b.shape[1] != first.m:
            raise ValueError(f"base has dimension {b.shape[1]}, polynomials have m={first.m}")
        if b.shape[0] == 1 and batch > 1:
            b = np.repeat(b, batch, axis=0)
        if b.shape[0] != batch:
            raise ValueError(f"base batch {b.shape[0]} does not match component batch {batch}")
        self.base = b
        self.components = list(components)

    @classmethod
    def zeros(cls, base, n: int, r: int, exact: bool = False) -> "Jet":
        b = np.atleast_2d(np.asarray(base, dtype=object if exact else np.float64))
        comps = [TruncatedPoly.zeros(b.shape[1], r, b.shape[0], exact) for _ in range(n)]
        return cls(b, comps)

    # ------------------------------------------------------------ shape
    @property
    def m(self) -> int:
        return self.components[0].m

    @property
    def n(self) -> int:
        return len(self.components)

    @property
    def r(self) -> int:
        return self.components[0].r

    @property
    def exact(self) -> bool:
        return self.components[0].exact

    @property
    def batch(self) -> int:
        return self.base.shape[0]

    @property
    def basis(self):
        return self.components[0].basis

    def coeff_array(self) -> np.ndarray:
        """Coefficients stacked as (n, P, B)."""
        return np.stack([p.coeffs for p in self.components])

    def D(self, alpha: MultiIndex) -> np.ndarray:
        """Derivative values D_alpha, shape (n,) or (n, B) when batched."""
        out = np.stack([p.derivative_value(alpha) for p in self.components])
        return out[:, 0] if self.batch == 1 else out

    def derivative_array(self) -> np.ndarray:
        """All D_alpha as (n, P, B), graded-lex along the middle axis."""
        fac = np.array(self.basis.factorials, dtype=object if self.exact else np.float64)
        return self.coeff_array() * fac[None, :, None]

    def take(self, idx) -> "Jet":
        return Jet(self.base[idx], [p.take(idx) for p in self.components])

    def to_float(self) -> "Jet":
        return Jet(self.base.astype(np.float64), [p.to_float() for p in self.components])

    def to_exact(self) -> "Jet":
        b = np.vectorize(as_exact, otypes=[object])(self.base)
        return Jet(b, [p.to_exact() for p in self.components])

    # ---------------------------------------------------- serialization
    def to_json(self) -> dict:
        """Single (unbatched) jet as {m, n, r, base, coeffs}."""
        if self.batch != 1:
            raise ValueError("only unbatched jets serialize; use take(i)")
        conv = _exact_json if self.exact else float
        return {
            "m": self.m,
            "n": self.n,
            "r": self.r,
            "base": [conv(v) for v in self.base[0]],
            "coeffs": [[conv(v) for v in p.coeffs[:, 0]] for p in self.components],
        }

    @classmethod
    def from_json(cls, data) -> "Jet":
        if isinstance(data, str):
            data = json.loads(data)
        m, n, r = data["m"], data["n"], data["r"]
        exact = any(isinstance(v, str) for row in data["coeffs"] for v in row) or \
            any(isinstance(v, str) for v in data["base"])
        size = basis(m, r).size
        if len(data["coeffs"]) != n or any(len(row) != size for row in data["coeffs"]):
            raise ValueError(f"expected {n} coefficient rows of length {size}")
        if exact:
            base = np.array([as_exact(v) for v in data["base"]], dtype=object)
            comps = [TruncatedPoly(basis(m, r), np.array([as_exact(v) for v in row], dtype=object))
                     for row in data["coeffs"]]
        else:
            base = np.array(data["base"], dtype=np.float64)
            comps = [TruncatedPoly(basis(m, r), np.array(row, dtype=np.float64))
                     for row in data["coeffs"]]
        return cls(base, comps)

    def __repr__(self) -> str:
        mode = "exact" if self.exact else "float"
        return f"Jet(m={self.m}, n={self.n}, r={self.r}, {mode}, batch={self.batch})"


def _exact_json(v):
    v = as_exact(v)
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def jets_equal(a: Jet, b: Jet, tol: float = 0.0) -> bool:
    if (a.m, a.n, a.r, a.batch) != (b.m, b.n, b.r, b.batch):
        return False
    if a.exact and b.exact and tol == 0:
        return bool(np.all(a.base == b.base)) and all(
            np.all(p.coeffs == q.coeffs) for p, q in zip(a.components, b.components))
    da = a.coeff_array().astype(np.float64)
    db = b.coeff_array().astype(np.float64)
    return bool(np.max(np.abs(da - db), initial=0.0) <= tol
                and np.max(np.abs(a.base.astype(float) - b.base.astype(float))) <= max(tol, 1e-12))

