"""Smoothstep-based cutoff profiles.

All three profiles are built from the polynomial smoothstep

    S(s) = sum_{k=0}^{N} C(N+k, k) C(2N+1, N-k) (-1)^k s^{N+k+1},

which is 0 at s = 0, 1 at s = 1 and has its first ``N`` derivatives vanish at
both ends.  With the default ``N = 8`` every profile is C^8 and exactly
constant on its saturation regions.

* ``plateau``:    1 for |t| <= inner, 0 for |t| >= outer  (default 1/2, 1)
* ``transition``: 0 for |u| <= inner, 1 for |u| >= outer  (default 1/2, 3/4)
* ``step``:      -1 for u <= -1, 1 for u >= 1, monotone in between
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np

from ._scalars import DomainError, as_exact

SMOOTHNESS = 8


@lru_cache(maxsize=None)
def smoothstep_coeffs(n: int = SMOOTHNESS) -> tuple[int, ...]:
    """Integer power-basis coefficients of S (index = power)."""
    c = [0] * (2 * n + 2)
    for k in range(n + 1):
        c[n + k + 1] = comb(n + k, k) * comb(2 * n + 1, n - k) * (-1) ** k
    return tuple(c)


@lru_cache(maxsize=None)
def _derived_coeffs(k: int, n: int = SMOOTHNESS) -> tuple[int, ...]:
    c = list(smoothstep_coeffs(n))
    for _ in range(k):
        c = [i * c[i] for i in range(1, len(c))] or [0]
    return tuple(c)


def smoothstep_derivs(s, order: int, exact: bool = False) -> list[np.ndarray]:
    """[S(s), S'(s), ..., S^(order)(s)] elementwise for s in [0, 1]."""
    out = []
    for k in range(order + 1):
        c = _derived_coeffs(k)
        if exact:
            vals = []
            for x in s:
                acc = Fraction(0)
                for a in reversed(c):
                    acc = acc * x + a
                vals.append(acc)
            out.append(np.array(vals, dtype=object))
        else:
            # S(s) = 1 - S(1 - s): evaluate near the low end, where the
            # power basis does not cancel, and reflect (S^(k) picks (-1)^(k+1))
            s = np.asarray(s, dtype=np.float64)
            hi = s > 0.5
            val = np.polynomial.polynomial.polyval(np.where(hi, 1.0 - s, s),
                                                   np.array(c, dtype=np.float64))
            if k == 0:
                out.append(np.where(hi, 1.0 - val, val))
            else:
                out.append(np.where(hi, (-1) ** (k + 1) * val, val))
    return out


@dataclass(frozen=True)
class Profile:
    kind: str  # "plateau" | "transition" | "step"
    inner: float = 0.5
    outer: float = 1.0

    def __post_init__(self):
        if self.kind not in ("plateau", "transition", "step"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind != "step" and not (0 <= self.inner < self.outer):
            raise ValueError(f"need 0 <= inner < outer, got ({self.inner}, {self.outer})")

    # ----------------------------------------------------------------
    def derivatives(self, c, order: int) -> list[np.ndarray]:
        """Values of the profile and its derivatives up to ``order`` at ``c``.

        ``c`` is a 1-D array (float or Fraction objects); returns a list of
        ``order + 1`` arrays shaped like ``c``.
        """
        c = np.asarray(c)
        exact = c.dtype == object
        if self.kind == "step":
            lo, hi, width = -1, 1, 2
            pos = c
            sign = None
        else:
            lo, hi = self.inner, self.outer
            width = hi - lo
            if exact:
                lo, hi, width = as_exact(lo), as_exact(hi), as_exact(hi) - as_exact(lo)
            pos = np.abs(c)
            sign = np.where(np.asarray(c >= 0, dtype=bool), 1, -1)

        inside = (pos > lo) & (pos < hi)
        if order > SMOOTHNESS and np.any((pos == lo) | (pos == hi)):
            raise DomainError(
                f"{self.kind} profile is only C^{SMOOTHNESS} at its junctions; "
                f"order {order} requested there")

        if exact:
            s = np.array([(p - lo) / width if ins else Fraction(0)
                          for p, ins in zip(pos, inside)], dtype=object)
        else:
            s = np.clip((pos - lo) / width, 0.0, 1.0)
        sd = smoothstep_derivs(s, order, exact)

        zero = Fraction(0) if exact else 0.0
        out = []
        for k in range(order + 1):
            if k == 0:
                if self.kind == "plateau":
                    sat = np.where(pos >= hi, 0, 1)
                    val = 1 - sd[0]
                elif self.kind == "transition":
                    sat = np.where(pos >= hi, 1, 0)
                    val = sd[0]
                else:
                    sat = np.where(pos >= hi, 1, -1)
                    val = 2 * sd[0] - 1
                if exact:
                    sat = np.array([Fraction(int(v)) for v in sat], dtype=object)
                out.append(np.where(inside, val, sat))
                continue
            scale = width ** k
            if self.kind == "step":
                dk = 2 * sd[k] / scale
            else:
                dk = sd[k] * sign ** k / scale
                if self.kind == "plateau":
                    dk = -dk
            res = np.where(inside, dk, zero)
            if exact:
                res = np.array(list(res), dtype=object)
            out.append(res)
        return out

    def __call__(self, c):
        return self.derivatives(np.atleast_1d(np.asarray(c, dtype=np.float64)), 0)[0]

    def sup_norms(self, order: int) -> tuple[float, ...]:
        return _sup_norms(self, order)

    def to_json(self) -> dict:
        return {"inner": _num_json(self.inner), "outer": _num_json(self.outer)}


def _num_json(x):
    if isinstance(x, Fraction):
        return x.numerator if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    return x


@lru_cache(maxsize=None)
def _sup_norms(p: Profile, order: int) -> tuple[float, ...]:
    s = np.linspace(0.0, 1.0, 20001)
    sd = smoothstep_derivs(s, order)
    width = 2.0 if p.kind == "step" else float(p.outer) - float(p.inner)
    out = []
    for k in range(order + 1):
        if k == 0:
            out.append(1.0)
        else:
            factor = 2.0 if p.kind == "step" else 1.0
            out.append(float(np.max(np.abs(sd[k]))) * factor / width ** k)
    return tuple(out)


PLATEAU = Profile("plateau", 0.5, 1.0)
TRANSITION = Profile("transition", 0.5, 0.75)
STEP = Profile("step")
