"""Multi-index enumeration in graded lexicographic order.

Within one total degree, indices are listed with the exponent of the first
variable descending: ``(2,0), (1,1), (0,2)``.  This is the one canonical
order used for storage and serialization everywhere in the package.
"""
from __future__ import annotations

from functools import lru_cache
from itertools import combinations_with_replacement
from math import comb, factorial

import numpy as np

MultiIndex = tuple  # tuple[int, ...] of non-negative exponents


def order(alpha: MultiIndex) -> int:
    return sum(alpha)


def _homogeneous(m: int, d: int) -> list[MultiIndex]:
    out = []
    for combo in combinations_with_replacement(range(m), d):
        e = [0] * m
        for i in combo:
            e[i] += 1
        out.append(tuple(e))
    # descending lex: first exponent largest first
    out.sort(reverse=True)
    return out


def enumerate_multiindices(m: int, r: int) -> list[MultiIndex]:
    """All exponent tuples of length ``m`` and order ``<= r``, graded-lex."""
    if m < 1 or r < 0:
        raise ValueError(f"need m >= 1 and r >= 0, got m={m}, r={r}")
    out: list[MultiIndex] = []
    for d in range(r + 1):
        out.extend(_homogeneous(m, d))
    return out


def count(m: int, r: int) -> int:
    return comb(m + r, r)


def alpha_factorial(alpha: MultiIndex) -> int:
    f = 1
    for a in alpha:
        f *= factorial(a)
    return f


def add(alpha: MultiIndex, beta: MultiIndex) -> MultiIndex:
    return tuple(a + b for a, b in zip(alpha, beta))


def unit(m: int, i: int) -> MultiIndex:
    e = [0] * m
    e[i] = 1
    return tuple(e)


def to_multiset(alpha: MultiIndex) -> tuple[int, ...]:
    """Exponent tuple -> sorted tuple of variable indices (0-based)."""
    out = []
    for i, a in enumerate(alpha):
        out.extend([i] * a)
    return tuple(out)


def from_multiset(beta, m: int) -> MultiIndex:
    e = [0] * m
    for i in beta:
        e[i] += 1
    return tuple(e)


class Basis:
    """Index tables for dense truncated polynomials in ``m`` variables."""

    def __init__(self, m: int, r: int):
        self.m = m
        self.r = r
        self.indices: tuple[MultiIndex, ...] = tuple(enumerate_multiindices(m, r))
        self.size = len(self.indices)
        self.position = {a: i for i, a in enumerate(self.indices)}
        self.orders = np.array([sum(a) for a in self.indices], dtype=np.int64)
        self.factorials = [alpha_factorial(a) for a in self.indices]

        ti, tj, tk = [], [], []
        rows_j: list[list[int]] = [[] for _ in range(self.size)]
        rows_k: list[list[int]] = [[] for _ in range(self.size)]
        for i, a in enumerate(self.indices):
            for j, b in enumerate(self.indices):
                if self.orders[i] + self.orders[j] > r:
                    continue
                k = self.position[add(a, b)]
                ti.append(i)
                tj.append(j)
                tk.append(k)
                rows_j[i].append(j)
                rows_k[i].append(k)
        self.ti = np.array(ti, dtype=np.int64)
        self.tj = np.array(tj, dtype=np.int64)
        self.tk = np.array(tk, dtype=np.int64)
        self.rows_j = [np.array(x, dtype=np.int64) for x in rows_j]
        self.rows_k = [np.array(x, dtype=np.int64) for x in rows_k]

        # parent[i] = (slot of alpha - e_axis, axis) for the first nonzero axis
        self.parent: list[tuple[int, int] | None] = [None]
        for a in self.indices[1:]:
            axis = next(i for i, e in enumerate(a) if e)
            prev = list(a)
            prev[axis] -= 1
            self.parent.append((self.position[tuple(prev)], axis))

    def slots_up_to(self, l: int) -> int:
        """Number of leading slots with order <= l (graded order is a prefix)."""
        return count(self.m, l) if l >= 0 else 0

    def derivative_map(self, axis: int):
        """(src, dst, factor) arrays for d/dX_axis into the order r-1 basis."""
        return _derivative_map(self.m, self.r, axis)

    def __repr__(self) -> str:
        return f"Basis(m={self.m}, r={self.r}, size={self.size})"


@lru_cache(maxsize=None)
def basis(m: int, r: int) -> Basis:
    return Basis(m, r)


@lru_cache(maxsize=None)
def _derivative_map(m: int, r: int, axis: int):
    src_b = basis(m, r)
    dst_b = basis(m, max(r - 1, 0))
    src, dst, fac = [], [], []
    if r >= 1:
        for k, beta in enumerate(dst_b.indices):
            up = list(beta)
            up[axis] += 1
            src.append(src_b.position[tuple(up)])
            dst.append(k)
            fac.append(beta[axis] + 1)
    return np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64), fac
