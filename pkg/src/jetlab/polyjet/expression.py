"""Expression trees evaluated in truncated-polynomial arithmetic.

An :class:`Expr` is a finite tree over constants, coordinates, sums,
products, scalar powers, a few analytic univariate functions, the cutoff
profiles and composition.  Evaluating a tree on the coordinate jets at a
point produces the exact Taylor jet of the field there (float rounding
only); evaluating it on arbitrary polynomials gives truncated composition.

JSON form: single-key objects, e.g. ``{"const": "1/3"}``, ``{"coord": 0}``,
``{"add": [...]}``, ``{"pow": {"base": ..., "exponent": 2}}``,
``{"plateau": {"arg": ..., "inner": 0.5, "outer": 1}}``,
``{"compose": {"outer": ..., "inner": [...]}}``.
"""
from __future__ import annotations

import json
from fractions import Fraction
from numbers import Number

import numpy as np

from ..profiles import Profile
from .truncpoly import DomainError, TruncatedPoly, as_exact

KINDS = ("const", "coord", "add", "mul", "pow", "sin", "cos", "exp",
         "plateau", "transition", "step", "compose")
_UNARY = ("sin", "cos", "exp")
_PROFILES = ("plateau", "transition", "step")
_DEFAULT_PARAMS = {"plateau": (0.5, 1.0), "transition": (0.5, 0.75), "step": (-1, 1)}


class ExpressionError(ValueError):
    """Malformed expression tree; message carries the node path."""


def _num_from_json(v, path):
    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
        raise ExpressionError(f"{path}: expected a number or 'p/q' string, got {v!r}")
    if isinstance(v, str):
        try:
            return Fraction(v)
        except ValueError:
            raise ExpressionError(f"{path}: cannot parse rational {v!r}") from None
    return v


def _num_to_json(v):
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return v.numerator
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


class Expr:
    """Immutable expression node."""

    __slots__ = ("kind", "args", "value")

    def __init__(self, kind: str, args: tuple = (), value=None):
        if kind not in KINDS:
            raise ExpressionError(f"unknown node kind {kind!r}")
        self.kind = kind
        self.args = tuple(args)
        self.value = value

    # ------------------------------------------------------- constructors
    @staticmethod
    def const(c) -> "Expr":
        return Expr("const", (), c)

    @staticmethod
    def coord(i: int) -> "Expr":
        if i < 0:
            raise ExpressionError(f"coordinate index must be >= 0, got {i}")
        return Expr("coord", (), int(i))

    # ---------------------------------------------------------- operators
    def __add__(self, other):
        return Expr("add", (self, _wrap(other)))

    def __radd__(self, other):
        return Expr("add", (_wrap(other), self))

    def __mul__(self, other):
        return Expr("mul", (self, _wrap(other)))

    def __rmul__(self, other):
        return Expr("mul", (_wrap(other), self))

    def __neg__(self):
        return Expr("mul", (Expr.const(-1), self))

    def __sub__(self, other):
        return self + (-_wrap(other))

    def __rsub__(self, other):
        return _wrap(other) + (-self)

    def __truediv__(self, other):
        if isinstance(other, Expr):
            return self * other ** -1
        if isinstance(other, (int, Fraction)):
            return self * (Fraction(1) / other)
        return self * (1.0 / other)

    def __pow__(self, e):
        return Expr("pow", (self,), e)

    # -------------------------------------------------------- inspection
    def n_vars(self) -> int:
        """1 + the largest coordinate index referenced (0 if constant)."""
        if self.kind == "coord":
            return self.value + 1
        if self.kind == "compose":
            return max((a.n_vars() for a in self.args[1:]), default=0)
        return max((a.n_vars() for a in self.args), default=0)

    def is_exact_safe(self) -> bool:
        if self.kind in _UNARY:
            return False
        if self.kind == "pow" and not isinstance(self.value, (int, np.integer)):
            if not (isinstance(self.value, Fraction) and self.value.denominator == 1):
                return False
        return all(a.is_exact_safe() for a in self.args)

    # -------------------------------------------------------- evaluation
    def jet(self, inputs: list[TruncatedPoly]) -> TruncatedPoly:
        """Evaluate on polynomial inputs (one per coordinate)."""
        k = self.kind
        if k == "const":
            p0 = inputs[0]
            return TruncatedPoly.constant(p0.m, p0.r, self.value, p0.exact).broadcast(p0.batch)
        if k == "coord":
            if self.value >= len(inputs):
                raise ExpressionError(
                    f"coord {self.value} out of range for {len(inputs)} variables")
            return inputs[self.value]
        if k == "add":
            acc = self.args[0].jet(inputs)
            for a in self.args[1:]:
                acc = acc + a.jet(inputs)
            return acc
        if k == "mul":
            acc = self.args[0].jet(inputs)
            for a in self.args[1:]:
                acc = acc * a.jet(inputs)
            return acc
        if k == "compose":
            inner = [a.jet(inputs) for a in self.args[1:]]
            return self.args[0].jet(inner)
        p = self.args[0].jet(inputs)
        return _apply_univariate(self, p)

    def evaluate(self, points) -> np.ndarray:
        """Plain values at points of shape (B, m) or (m,)."""
        pts = np.asarray(points, dtype=np.float64)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        inputs = [TruncatedPoly.constant(pts.shape[1], 0, pts[:, i]) for i in range(pts.shape[1])]
        vals = self.jet(inputs).const
        return vals[0] if single else vals

    __call__ = evaluate

    # ------------------------------------------------------ serialization
    def to_json(self):
        k = self.kind
        if k == "const":
            return {"const": _num_to_json(self.value)}
        if k == "coord":
            return {"coord": self.value}
        if k in ("add", "mul"):
            return {k: [a.to_json() for a in self.args]}
        if k == "pow":
            return {"pow": {"base": self.args[0].to_json(), "exponent": _num_to_json(self.value)}}
        if k in _UNARY:
            return {k: self.args[0].to_json()}
        if k in _PROFILES:
            inner, outer = self.value
            return {k: {"arg": self.args[0].to_json(),
                        "inner": _num_to_json(inner), "outer": _num_to_json(outer)}}
        return {"compose": {"outer": self.args[0].to_json(),
                            "inner": [a.to_json() for a in self.args[1:]]}}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))

    def __eq__(self, other):
        return isinstance(other, Expr) and self.dumps() == other.dumps()

    def __hash__(self):
        return hash(self.dumps())

    def __repr__(self):
        return f"Expr({self.dumps()})"


def _wrap(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (Number, Fraction)):
        return Expr.const(x)
    raise TypeError(f"cannot use {type(x).__name__} in an expression")


# ------------------------------------------------------------- primitives

def sin(e: Expr) -> Expr:
    return Expr("sin", (_wrap(e),))


def cos(e: Expr) -> Expr:
    return Expr("cos", (_wrap(e),))


def exp(e: Expr) -> Expr:
    return Expr("exp", (_wrap(e),))


def plateau(e: Expr, inner=0.5, outer=1.0) -> Expr:
    Profile("plateau", float(inner), float(outer))
    return Expr("plateau", (_wrap(e),), (inner, outer))


def transition(e: Expr, inner=0.5, outer=0.75) -> Expr:
    Profile("transition", float(inner), float(outer))
    return Expr("transition", (_wrap(e),), (inner, outer))


def step(e: Expr) -> Expr:
    return Expr("step", (_wrap(e),), (-1, 1))


def compose(outer: Expr, inner: list[Expr]) -> Expr:
    need = outer.n_vars()
    if len(inner) < need:
        raise ExpressionError(f"compose: outer uses {need} variables, got {len(inner)} inner")
    return Expr("compose", (outer, *map(_wrap, inner)))


def coords(m: int) -> list[Expr]:
    return [Expr.coord(i) for i in range(m)]


def _apply_univariate(node: Expr, p: TruncatedPoly) -> TruncatedPoly:
    r = p.r
    c = p.const
    k = node.kind
    if p.exact and k in _UNARY:
        raise DomainError(f"{k} is not available in exact mode")
    if k == "pow":
        e = node.value
        if isinstance(e, Fraction) and e.denominator == 1:
            e = e.numerator
        if isinstance(e, (int, np.integer)) and e >= 0:
            return p ** int(e)
        if p.exact and not isinstance(e, (int, np.integer)):
            raise DomainError(f"fractional power {e} is not available in exact mode")
        if isinstance(e, (int, np.integer)):
            if np.any(c == 0):
                raise DomainError(f"negative power {e} at a zero base")
        elif np.any(np.asarray(c, dtype=np.float64) <= 0):
            raise DomainError(f"non-integer power {e} needs a positive base")
        derivs = []
        coef = Fraction(1) if p.exact else 1.0
        for j in range(r + 1):
            if p.exact:
                derivs.append(np.array([coef * as_exact(x) ** (int(e) - j) for x in c], dtype=object))
            else:
                derivs.append(coef * np.asarray(c, dtype=np.float64) ** (float(e) - j))
            coef = coef * (e - j)
        return p.compose_univariate(derivs)
    if k == "sin":
        derivs = [np.sin(c + j * np.pi / 2) for j in range(r + 1)]
    elif k == "cos":
        derivs = [np.cos(c + j * np.pi / 2) for j in range(r + 1)]
    elif k == "exp":
        ec = np.exp(c)
        derivs = [ec] * (r + 1)
    else:
        inner, outer = node.value
        prof = Profile(k, inner, outer) if k != "step" else Profile("step")
        derivs = prof.derivatives(c, r)
    return p.compose_univariate(derivs)


# --------------------------------------------------------------- parsing

def parse_field_expression(data, m: int | None = None) -> Expr:
    """Parse JSON text or an already-decoded object into an :class:`Expr`.

    ``m``, when given, bounds the coordinate indices.
    """
    if isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise ExpressionError(f"$: invalid JSON ({exc})") from None
    return _parse(data, "$", m)


def _parse(node, path: str, m: int | None) -> Expr:
    if isinstance(node, (int, float)) and not isinstance(node, bool):
        return Expr.const(node)
    if not isinstance(node, dict) or len(node) != 1:
        raise ExpressionError(f"{path}: expected a single-key object, got {node!r}")
    (kind, body), = node.items()
    here = f"{path}.{kind}"
    if kind not in KINDS:
        raise ExpressionError(f"{path}: unknown node kind {kind!r}")
    if kind == "const":
        return Expr.const(_num_from_json(body, here))
    if kind == "coord":
        if isinstance(body, bool) or not isinstance(body, int) or body < 0:
            raise ExpressionError(f"{here}: axis must be a non-negative integer, got {body!r}")
        if m is not None and body >= m:
            raise ExpressionError(f"{here}: axis {body} out of range for m={m}")
        return Expr.coord(body)
    if kind in ("add", "mul"):
        if not isinstance(body, list) or len(body) < 2:
            raise ExpressionError(f"{here}: needs a list of at least 2 operands")
        return Expr(kind, tuple(_parse(a, f"{here}[{i}]", m) for i, a in enumerate(body)))
    if kind == "pow":
        if not isinstance(body, dict) or set(body) != {"base", "exponent"}:
            raise ExpressionError(f"{here}: needs exactly 'base' and 'exponent'")
        return Expr("pow", (_parse(body["base"], f"{here}.base", m),),
                    _num_from_json(body["exponent"], f"{here}.exponent"))
    if kind in _UNARY:
        return Expr(kind, (_parse(body, here, m),))
    if kind in _PROFILES:
        if not isinstance(body, dict) or "arg" not in body:
            raise ExpressionError(f"{here}: needs an 'arg' entry")
        extra = set(body) - {"arg", "inner", "outer"}
        if extra:
            raise ExpressionError(f"{here}: unexpected keys {sorted(extra)}")
        d_in, d_out = _DEFAULT_PARAMS[kind]
        inner = _num_from_json(body.get("inner", d_in), f"{here}.inner")
        outer = _num_from_json(body.get("outer", d_out), f"{here}.outer")
        if kind != "step":
            try:
                Profile(kind, float(inner), float(outer))
            except ValueError as exc:
                raise ExpressionError(f"{here}: {exc}") from None
        return Expr(kind, (_parse(body["arg"], f"{here}.arg", m),), (inner, outer))
    # compose
    if not isinstance(body, dict) or set(body) != {"outer", "inner"}:
        raise ExpressionError(f"{here}: needs exactly 'outer' and 'inner'")
    if not isinstance(body["inner"], list) or not body["inner"]:
        raise ExpressionError(f"{here}.inner: needs a non-empty list")
    outer_e = _parse(body["outer"], f"{here}.outer", None)
    inner_e = [_parse(a, f"{here}.inner[{i}]", m) for i, a in enumerate(body["inner"])]
    if outer_e.n_vars() > len(inner_e):
        raise ExpressionError(
            f"{here}: outer uses {outer_e.n_vars()} variables but {len(inner_e)} inner given")
    return Expr("compose", (outer_e, *inner_e))


class VectorField:
    """A tuple of scalar expressions, one per output component."""

    def __init__(self, components):
        comps = [components] if isinstance(components, Expr) else list(components)
        if not comps:
            raise ExpressionError("a vector field needs at least one component")
        self.components = tuple(_wrap(c) for c in comps)

    @property
    def n(self) -> int:
        return len(self.components)

    def n_vars(self) -> int:
        return max(c.n_vars() for c in self.components)

    def jet(self, inputs: list[TruncatedPoly]) -> list[TruncatedPoly]:
        return [c.jet(inputs) for c in self.components]

    def evaluate(self, points) -> np.ndarray:
        """Values of shape (B, n) (or (n,) for a single point)."""
        return np.stack([np.asarray(c.evaluate(points)) for c in self.components], axis=-1)

    __call__ = evaluate

    def to_json(self):
        return [c.to_json() for c in self.components]

    @classmethod
    def from_json(cls, data, m: int | None = None) -> "VectorField":
        if isinstance(data, str):
            data = json.loads(data)
        if isinstance(data, list):
            return cls([_parse(d, f"$[{i}]", m) for i, d in enumerate(data)])
        return cls([_parse(data, "$", m)])

    def scaled(self, c) -> "VectorField":
        return VectorField([Expr.const(c) * e for e in self.components])
