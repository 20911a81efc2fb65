"""Scalar helpers shared by the float and exact-rational code paths."""
from __future__ import annotations

from fractions import Fraction

import numpy as np


class DomainError(ValueError):
    """A univariate primitive was evaluated outside its smooth domain."""


def as_exact(x):
    """Coerce a number (or string 'p/q') to Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, (float, np.floating)):
        return Fraction(float(x))
    raise TypeError(f"cannot make {x!r} exact")
