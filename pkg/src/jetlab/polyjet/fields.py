"""Vector fields that are not expression trees.

They share the VectorField interface (``n``, ``n_vars``, ``jet``,
``evaluate``, ``scaled``, ``to_json``) so they can stand wherever a field
of coefficients is expected: pulled-back fields, derivatives of a computed
approximation, and weighted sums of those.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from .expression import VectorField
from .truncpoly import TruncatedPoly


def _shift(inputs: list[TruncatedPoly]) -> tuple[np.ndarray, list[TruncatedPoly]]:
    base = np.stack([np.asarray(p.const, dtype=np.float64) for p in inputs], axis=1)
    return base, [p - p.const for p in inputs]


class CallableField(VectorField):
    """A field known through its jets: ``jet_fn(points, r)`` gives n polys in m variables."""

    def __init__(self, jet_fn, m: int, n: int, label: str = "callable"):
        self._jet_fn, self._m, self._n, self.label = jet_fn, m, n, label
        self.components = None

    @property
    def n(self) -> int:
        return self._n

    def n_vars(self) -> int:
        return self._m

    def jet(self, inputs: list[TruncatedPoly]) -> list[TruncatedPoly]:
        base, shifted = _shift(inputs[: self._m])
        polys = self._jet_fn(base, inputs[0].r)
        return [p.substitute(shifted) for p in polys]

    def evaluate(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return np.stack([np.asarray(p.const) for p in self._jet_fn(pts, 0)], axis=-1)

    __call__ = evaluate

    def scaled(self, c) -> "FieldSum":
        return FieldSum([(c, self)])

    def to_json(self):
        return {"opaque": self.label, "n": self._n}


class FieldSum(VectorField):
    """sum_i w_i * F_i for fields of equal output size."""

    def __init__(self, parts):
        self.parts = [(w, f) for w, f in parts]
        if not self.parts:
            raise ValueError("empty field sum")
        if len({f.n for _, f in self.parts}) > 1:
            raise ValueError("summands have different output sizes")
        self.components = None

    @property
    def n(self) -> int:
        return self.parts[0][1].n

    def n_vars(self) -> int:
        return max(f.n_vars() for _, f in self.parts)

    def jet(self, inputs):
        out = None
        for w, f in self.parts:
            w = float(w)
            polys = [p * w for p in f.jet(inputs)]
            out = polys if out is None else [a + b for a, b in zip(out, polys)]
        return out

    def evaluate(self, points):
        return sum(float(w) * np.asarray(f.evaluate(points)) for w, f in self.parts)

    __call__ = evaluate

    def scaled(self, c) -> "FieldSum":
        return FieldSum([(w * c if isinstance(w, Fraction) else float(w) * float(c), f)
                         for w, f in self.parts])

    def to_json(self):
        return {"sum": [{"weight": str(w), "field": f.to_json()} for w, f in self.parts]}


class ComposedField(VectorField):
    """v o F for a map F exposing ``map_polys`` and ``__call__``."""

    def __init__(self, v: VectorField, F, label: str = "pullback"):
        self.v, self.F, self.label = v, F, label
        self.components = None

    @property
    def n(self) -> int:
        return self.v.n

    def n_vars(self) -> int:
        return self.F.m

    def jet(self, inputs):
        return self.v.jet(self.F.map_polys(inputs[: self.F.m]))

    def evaluate(self, points):
        return self.v.evaluate(self.F(np.atleast_2d(points)))

    __call__ = evaluate

    def scaled(self, c) -> "ComposedField":
        return ComposedField(self.v.scaled(c), self.F, self.label)

    def to_json(self):
        return {"compose_map": self.label, "field": self.v.to_json()}
