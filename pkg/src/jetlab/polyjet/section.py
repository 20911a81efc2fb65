"""Jet sections over the cube: fields of jets evaluable at sample points."""
from __future__ import annotations

import numpy as np

from .expression import VectorField
from .jet import Jet
from .truncpoly import TruncatedPoly, as_exact


class JetSection:
    """Base class: ``evaluate(points)`` returns a batched :class:`Jet`."""

    m: int
    n: int
    r: int

    def evaluate(self, points) -> Jet:  # pragma: no cover - interface
        raise NotImplementedError

    def __call__(self, points) -> Jet:
        return self.evaluate(points)


class FieldSection(JetSection):
    """The holonomic section x -> j^r(f)(x) of an expression field."""

    def __init__(self, field, m: int, r: int):
        self.field = field if isinstance(field, VectorField) else VectorField(field)
        if self.field.n_vars() > m:
            raise ValueError(f"field uses {self.field.n_vars()} variables, m={m}")
        self.m, self.n, self.r = m, self.field.n, r

    def evaluate(self, points, exact: bool = False) -> Jet:
        return taylor_jets(self.field, points, self.r, exact)


class FunctionSection(JetSection):
    """Wrap any callable points -> Jet."""

    def __init__(self, func, m: int, n: int, r: int):
        self.func, self.m, self.n, self.r = func, m, n, r

    def evaluate(self, points) -> Jet:
        return self.func(np.atleast_2d(np.asarray(points, dtype=np.float64)))


class SampledSection(JetSection):
    """A stored grid of jets; evaluation only at the stored samples."""

    def __init__(self, grid, jets: Jet):
        self.grid = grid
        self.jets = jets
        self.m, self.n, self.r = jets.m, jets.n, jets.r
        self._points = grid.points()
        if len(self._points) != jets.batch:
            raise ValueError("one jet per grid sample required")

    def evaluate(self, points) -> Jet:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        idx = []
        for p in pts:
            d = np.max(np.abs(self._points - p), axis=1)
            k = int(np.argmin(d))
            if d[k] > 1e-12:
                raise ValueError(f"point {p} is not a stored sample")
            idx.append(k)
        return self.jets.take(np.array(idx))


def taylor_jets(field, points, r: int, exact: bool = False) -> Jet:
    """Jets of ``field`` (Expr or VectorField) at points (B, m) or (m,)."""
    vf = field if isinstance(field, VectorField) else VectorField(field)
    if exact:
        pts = np.asarray(points, dtype=object)
        if pts.ndim == 1:
            pts = pts[None, :]
        pts = np.vectorize(as_exact, otypes=[object])(pts)
    else:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    ident = TruncatedPoly.identity(pts, r, exact)
    return Jet(pts, vf.jet(ident))

