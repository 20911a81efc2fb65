"""Tensor-product sample grids over boxes."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Per-axis sample counts over a box (default the cube [-1, 1]^m)."""

    counts: tuple[int, ...]
    lower: tuple[float, ...] | None = None
    upper: tuple[float, ...] | None = None
    refinement: int = 2
    min_count: int = field(default=3, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        m = len(self.counts)
        if self.lower is None:
            object.__setattr__(self, "lower", (-1.0,) * m)
        if self.upper is None:
            object.__setattr__(self, "upper", (1.0,) * m)
        if len(self.lower) != m or len(self.upper) != m:
            raise ValueError("bounds must match the number of axes")
        if any(c < 1 for c in self.counts):
            raise ValueError(f"sample counts must be positive, got {self.counts}")

    @classmethod
    def uniform(cls, m: int, count: int, lower=-1.0, upper=1.0) -> "GridSpec":
        return cls((count,) * m, (float(lower),) * m, (float(upper),) * m)

    @property
    def m(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.counts

    @property
    def steps(self) -> tuple[float, ...]:
        return tuple((u - l) / (c - 1) if c > 1 else 0.0
                     for c, l, u in zip(self.counts, self.lower, self.upper))

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(l, u, c) for c, l, u in zip(self.counts, self.lower, self.upper)]

    def points(self) -> np.ndarray:
        """All samples as (N, m), C order over the axes."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)

    def refined(self, factor: int | None = None) -> "GridSpec":
        f = factor or self.refinement
        return GridSpec(tuple((c - 1) * f + 1 for c in self.counts), self.lower, self.upper,
                        self.refinement, self.min_count)

    def scaled(self, factor: float) -> "GridSpec":
        return GridSpec(tuple(max(2, int(round((c - 1) * factor)) + 1) for c in self.counts),
                        self.lower, self.upper, self.refinement, self.min_count)

    def check_resolution(self) -> None:
        if any(c < self.min_count for c in self.counts):
            raise ValueError(f"grid {self.counts} below the minimum of {self.min_count} per axis")

    def to_json(self) -> dict:
        return {"counts": list(self.counts), "lower": list(self.lower), "upper": list(self.upper)}
