"""Result container shared by the local constructions."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..polyjet.jet import Jet
from ..polyjet.section import JetSection
from ..polyjet.truncpoly import TruncatedPoly


class StageError(RuntimeError):
    """A stage of a multi-step construction failed."""

    def __init__(self, stage: int, reason: str, report: dict | None = None):
        super().__init__(f"stage {stage} failed: {reason}")
        self.stage = stage
        self.reason = reason
        self.report = report or {}


class HolonomicSection(JetSection):
    """sigma-hat = j^r(f), given by a jet evaluator for f."""

    def __init__(self, jet_fn: Callable[[np.ndarray, int], Jet], m: int, n: int, r: int):
        self._jet_fn = jet_fn
        self.m, self.n, self.r = m, n, r

    def evaluate(self, points, r: int | None = None) -> Jet:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return self._jet_fn(pts, self.r if r is None else r)

    def values(self, points) -> np.ndarray:
        jet = self.evaluate(points, 0)
        return np.stack([p.const for p in jet.components], axis=1)


class IdentityIsotopy:
    """Stand-in for F_t when a construction does not move anything."""

    motions: list = []

    def __init__(self, m: int):
        self.m = m

    def __call__(self, points, t: float = 1.0, z=None):
        return np.atleast_2d(np.asarray(points, dtype=np.float64)).copy()

    def inverse(self, points, t: float = 1.0, z=None):
        return self(points)

    def map_polys(self, X, t: float = 1.0, z=None):
        return list(X)

    def jet(self, points, r: int, t: float = 1.0, z=None) -> Jet:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return Jet(pts, TruncatedPoly.identity(pts, r))

    inverse_jet = jet

    def to_json(self) -> dict:
        return {"kind": "identity", "m": self.m}


@dataclass
class ApproximationResult:
    sigma_hat: HolonomicSection
    isotopy: object
    path: str
    params: dict = field(default_factory=dict)
    norms: dict = field(default_factory=dict)
    measurements: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    stages: list = field(default_factory=list)
    model: object = field(default=None, repr=False)
    sigma: object = field(default=None, repr=False)
    grid_rule: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(bool(v) for v in self.checks.values())

    def to_json(self) -> dict:
        iso = self.isotopy.to_json() if hasattr(self.isotopy, "to_json") else str(self.isotopy)
        return _clean({
            "path": self.path,
            "params": self.params,
            "isotopy": iso,
            "norms": self.norms,
            "measurements": self.measurements,
            "checks": self.checks,
            "stages": self.stages,
            "grid_rule": self.grid_rule,
        })

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    return obj
