"""Dense truncated polynomials, optionally batched over sample points.

A :class:`TruncatedPoly` holds the coefficients of an ``m``-variable
polynomial of degree ``<= r`` as a block of shape ``(P, B)``: one row per
multi-index (graded-lex order) and one column per batch entry.  ``B = 1``
for a single polynomial.  Float blocks use ``float64``; exact blocks are
``object`` arrays of :class:`fractions.Fraction`.  Both go through the same
methods; only the product kernel branches on dtype.
"""
from __future__ import annotations

from fractions import Fraction
from math import factorial
from numbers import Number

import numpy as np

from .. import _kernels
from .._scalars import DomainError, as_exact  # noqa: F401
from .multiindex import Basis, MultiIndex, basis


def _row(value, exact: bool) -> np.ndarray:
    """Scalar or 1-D batch of values -> row of shape (B,)."""
    arr = np.asarray(value, dtype=object if exact else None)
    if exact:
        arr = np.array([as_exact(v) for v in np.ravel(arr)], dtype=object)
    else:
        arr = np.ravel(arr).astype(np.float64)
    return arr


class TruncatedPoly:
    __slots__ = ("basis", "coeffs")

    def __init__(self, basis_: Basis, coeffs: np.ndarray):
        if coeffs.ndim == 1:
            coeffs = coeffs[:, None]
        if coeffs.shape[0] != basis_.size:
            raise ValueError(f"expected {basis_.size} coefficient rows, got {coeffs.shape[0]}")
        self.basis = basis_
        self.coeffs = coeffs

    # ------------------------------------------------------------ builders
    @classmethod
    def zeros(cls, m: int, r: int, batch: int = 1, exact: bool = False) -> "TruncatedPoly":
        b = basis(m, r)
        if exact:
            c = np.empty((b.size, batch), dtype=object)
            c[...] = Fraction(0)
        else:
            c = np.zeros((b.size, batch))
        return cls(b, c)

    @classmethod
    def constant(cls, m: int, r: int, value, exact: bool = False) -> "TruncatedPoly":
        row = _row(value, exact)
        p = cls.zeros(m, r, len(row), exact)
        p.coeffs[0] = row
        return p

    @classmethod
    def variable(cls, m: int, r: int, axis: int, value=0, exact: bool = False) -> "TruncatedPoly":
        """The germ y -> y_axis expanded at the point with that coordinate ``value``."""
        p = cls.constant(m, r, value, exact)
        if r >= 1:
            one = Fraction(1) if exact else 1.0
            e = [0] * m
            e[axis] = 1
            p.coeffs[p.basis.position[tuple(e)]] = one
        return p

    @classmethod
    def identity(cls, points, r: int, exact: bool = False) -> list["TruncatedPoly"]:
        """Jets of the coordinate functions at each row of ``points`` (B, m)."""
        pts = np.asarray(points, dtype=object if exact else np.float64)
        if pts.ndim == 1:
            pts = pts[None, :]
        m = pts.shape[1]
        return [cls.variable(m, r, i, pts[:, i], exact) for i in range(m)]

    @classmethod
    def from_dict(cls, m: int, r: int, terms: dict, exact: bool = False) -> "TruncatedPoly":
        p = cls.zeros(m, r, 1, exact)
        for alpha, c in terms.items():
            if sum(alpha) <= r:
                p.coeffs[p.basis.position[tuple(alpha)], 0] = as_exact(c) if exact else float(c)
        return p

    # ---------------------------------------------------------- properties
    @property
    def m(self) -> int:
        return self.basis.m

    @property
    def r(self) -> int:
        return self.basis.r

    @property
    def exact(self) -> bool:
        return self.coeffs.dtype == object

    @property
    def batch(self) -> int:
        return self.coeffs.shape[1]

    @property
    def const(self) -> np.ndarray:
        return self.coeffs[0]

    def __getitem__(self, alpha: MultiIndex):
        row = self.coeffs[self.basis.position[tuple(alpha)]]
        return row[0] if self.batch == 1 else row

    def derivative_value(self, alpha: MultiIndex):
        """D_alpha = alpha! * coefficient(alpha)."""
        k = self.basis.position[tuple(alpha)]
        return self.coeffs[k] * self.basis.factorials[k]

    def copy(self) -> "TruncatedPoly":
        return TruncatedPoly(self.basis, self.coeffs.copy())

    def take(self, idx) -> "TruncatedPoly":
        if self.batch == 1:
            return self
        return TruncatedPoly(self.basis, self.coeffs[:, idx])

    def broadcast(self, batch: int) -> "TruncatedPoly":
        if self.batch == batch:
            return self
        if self.batch != 1:
            raise ValueError(f"cannot broadcast batch {self.batch} to {batch}")
        return TruncatedPoly(self.basis, np.repeat(self.coeffs, batch, axis=1))

    def to_exact(self) -> "TruncatedPoly":
        if self.exact:
            return self
        c = np.vectorize(as_exact, otypes=[object])(self.coeffs)
        return TruncatedPoly(self.basis, c)

    def to_float(self) -> "TruncatedPoly":
        if not self.exact:
            return self
        return TruncatedPoly(self.basis, self.coeffs.astype(np.float64))

    # ----------------------------------------------------------- algebra
    def _coerce(self, other):
        if isinstance(other, TruncatedPoly):
            if other.basis is not self.basis:
                raise ValueError(f"basis mismatch: {self.basis} vs {other.basis}")
            return other.coeffs
        row = _row(other, self.exact)
        out = np.zeros((self.basis.size, len(row)), dtype=row.dtype)
        if self.exact:
            out[...] = Fraction(0)
        out[0] = row
        return out

    def __add__(self, other):
        return TruncatedPoly(self.basis, self.coeffs + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return TruncatedPoly(self.basis, self.coeffs - self._coerce(other))

    def __rsub__(self, other):
        return TruncatedPoly(self.basis, self._coerce(other) - self.coeffs)

    def __neg__(self):
        return TruncatedPoly(self.basis, -self.coeffs)

    def scale(self, factor) -> "TruncatedPoly":
        """Multiply by a scalar or a per-batch row of scalars."""
        row = _row(factor, self.exact)
        return TruncatedPoly(self.basis, self.coeffs * row[None, :])

    def __mul__(self, other):
        if isinstance(other, TruncatedPoly):
            if other.basis is not self.basis:
                raise ValueError(f"basis mismatch: {self.basis} vs {other.basis}")
            a, b = np.broadcast_arrays(self.coeffs, other.coeffs)
            if a.dtype != b.dtype:
                a = a.astype(object) if b.dtype == object else a
                b = b.astype(object) if a.dtype == object else b
            return TruncatedPoly(self.basis, _kernels.truncated_mul(a, b, self.basis))
        if isinstance(other, (Number, Fraction, np.ndarray, list)):
            return self.scale(other)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, TruncatedPoly):
            return NotImplemented
        if self.exact:
            row = _row(other, True)
            return TruncatedPoly(self.basis, self.coeffs / row[None, :])
        return self.scale(1.0 / np.asarray(other, dtype=np.float64))

    def __pow__(self, k: int):
        if not isinstance(k, (int, np.integer)) or k < 0:
            raise ValueError("TruncatedPoly ** k needs a non-negative integer k")
        result = TruncatedPoly.constant(self.m, self.r, 1, self.exact).broadcast(self.batch)
        base = self
        k = int(k)
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    # ------------------------------------------------------ jet operations
    def truncate(self, l: int) -> "TruncatedPoly":
        """Forget homogeneous parts of degree > l (result has order l)."""
        if l > self.r or l < 0:
            raise ValueError(f"cannot project order {self.r} to {l}")
        n = self.basis.slots_up_to(l)
        return TruncatedPoly(basis(self.m, l), self.coeffs[:n].copy())

    def extend(self, r: int) -> "TruncatedPoly":
        """Zero-pad to a higher truncation order."""
        if r < self.r:
            raise ValueError("extend() only raises the order")
        out = TruncatedPoly.zeros(self.m, r, self.batch, self.exact)
        out.coeffs[: self.basis.size] = self.coeffs
        return out

    def homogeneous(self, j: int) -> "TruncatedPoly":
        keep = self.basis.orders == j
        c = self.coeffs.copy()
        c[~keep] = Fraction(0) if self.exact else 0.0
        return TruncatedPoly(self.basis, c)

    def derivative(self, axis: int) -> "TruncatedPoly":
        """d/dX_axis, dropping one order."""
        src, dst, fac = self.basis.derivative_map(axis)
        out = TruncatedPoly.zeros(self.m, max(self.r - 1, 0), self.batch, self.exact)
        if len(src):
            f = np.array(fac, dtype=object if self.exact else np.float64)[:, None]
            out.coeffs[dst] = self.coeffs[src] * f
        return out

    def compose_univariate(self, derivs) -> "TruncatedPoly":
        """Taylor-compose a univariate function onto this polynomial.

        ``derivs[k]`` holds f^(k) at the constant term (one row per batch
        entry), k = 0..r.
        """
        r = self.r
        d = self - self.const
        res = None
        for k in range(r, -1, -1):
            ck = np.asarray(derivs[k], dtype=object if self.exact else np.float64)
            ck = ck / factorial(k) if not self.exact else np.array(
                [as_exact(v) / factorial(k) for v in np.ravel(ck)], dtype=object)
            if res is None:
                res = TruncatedPoly.constant(self.m, r, ck, self.exact).broadcast(self.batch)
            else:
                res = res * d + ck
        return res

    def substitute(self, inner: list["TruncatedPoly"]) -> "TruncatedPoly":
        """Evaluate this polynomial (in len(inner) variables) at polynomials
        with zero constant term; truncated at the order of ``inner``."""
        if len(inner) != self.m:
            raise ValueError(f"need {self.m} inner polynomials, got {len(inner)}")
        ib = inner[0].basis
        exact = self.exact or inner[0].exact
        batch = max([self.batch] + [p.batch for p in inner])
        inner = [p.broadcast(batch) for p in inner]
        rr = ib.r
        prods: list[TruncatedPoly | None] = [None] * self.basis.size
        prods[0] = TruncatedPoly.constant(ib.m, rr, 1, exact).broadcast(batch)
        coeffs = self.coeffs if self.batch == batch else np.repeat(self.coeffs, batch, axis=1)
        acc = prods[0].scale(coeffs[0])
        for s in range(1, self.basis.size):
            if self.basis.orders[s] > rr:
                break
            parent, axis = self.basis.parent[s]
            prods[s] = prods[parent] * inner[axis]
            acc = acc + prods[s].scale(coeffs[s])
        return acc

    def __repr__(self) -> str:
        mode = "exact" if self.exact else "float"
        return f"TruncatedPoly(m={self.m}, r={self.r}, {mode}, batch={self.batch})"


def stack_const(polys: list[TruncatedPoly]) -> np.ndarray:
    """Constant terms of a list of polys as an array (B, len(polys))."""
    return np.stack([np.asarray(p.const) for p in polys], axis=1)
