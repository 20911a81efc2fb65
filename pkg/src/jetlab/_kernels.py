"""Hot numeric kernels.

Each kernel has a numba implementation and a pure-numpy twin with the same
signature.  The numba path is used when numba imports cleanly and the
environment variable ``JETLAB_DISABLE_NUMBA`` is unset (or ``0``).  Both
paths are importable directly as ``*_numba`` / ``*_numpy`` so the benchmark
and the tests can compare them.
"""
from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

_flag = os.environ.get("JETLAB_DISABLE_NUMBA", "").strip().lower()
USE_NUMBA = HAVE_NUMBA and _flag in ("", "0", "false", "no")


def _optional_njit(func):
    if HAVE_NUMBA:
        return njit(cache=True)(func)
    return func


# ---------------------------------------------------------------- products

def truncated_mul_numpy(a, b, rows_j, rows_k):
    """Truncated product of two coefficient blocks of shape (P, B).

    ``rows_j[i]`` / ``rows_k[i]`` list, for basis slot ``i``, the partner
    slots ``j`` with ``|i|+|j| <= r`` and the slot ``k`` of ``i + j``.
    """
    out = np.zeros(a.shape, dtype=np.result_type(a, b))
    for i in range(a.shape[0]):
        js = rows_j[i]
        if len(js) == 0:
            continue
        out[rows_k[i]] += a[i][None, :] * b[js]
    return out


@_optional_njit
def truncated_mul_numba(a, b, ti, tj, tk):
    P, B = a.shape
    out = np.zeros((P, B))
    for t in range(ti.shape[0]):
        i = ti[t]
        j = tj[t]
        k = tk[t]
        for q in range(B):
            out[k, q] += a[i, q] * b[j, q]
    return out


def truncated_mul(a, b, basis):
    """Dispatch the truncated product; object (exact) blocks never hit numba."""
    if a.dtype == object or b.dtype == object:
        return truncated_mul_numpy(a, b, basis.rows_j, basis.rows_k)
    if USE_NUMBA:
        return truncated_mul_numba(
            np.ascontiguousarray(a, dtype=np.float64),
            np.ascontiguousarray(b, dtype=np.float64),
            basis.ti, basis.tj, basis.tk,
        )
    return truncated_mul_numpy(a, b, basis.rows_j, basis.rows_k)


# ----------------------------------------------------------- polynomials

@_optional_njit
def _horner(coeffs, s):
    acc = 0.0
    for c in coeffs[::-1]:
        acc = acc * s + c
    return acc


@_optional_njit
def _smoothstep(coeffs, s):
    # S(s) = 1 - S(1 - s) keeps the power basis away from its cancelling end
    if s > 0.5:
        return 1.0 - _horner(coeffs, 1.0 - s)
    return _horner(coeffs, s)


def smoothstep_numpy(coeffs, s):
    s = np.asarray(s, dtype=np.float64)
    hi = s > 0.5
    val = np.polynomial.polynomial.polyval(np.where(hi, 1.0 - s, s), coeffs)
    return np.where(hi, 1.0 - val, val)


# ---------------------------------------------------------- root solving

@_optional_njit
def _transition(u, coeffs, inner, outer):
    # even transition profile: 0 for |u| <= inner, 1 for |u| >= outer
    a = abs(u)
    if a <= inner:
        return 0.0
    if a >= outer:
        return 1.0
    return _smoothstep(coeffs, (a - inner) / (outer - inner))


@_optional_njit
def _solve_last_numba(x, amp, eps, delta, zfac, coeffs, dcoeffs,
                      chi_inner, chi_outer, tol, maxit):
    """Solve y_m + phi(y) = x_m per row, with y_i = x_i for i < m.

    phi(y) = amp*sin(pi*y_1/(2 delta)) * prod_{i<m} T((1-|y_i|)/eps)
             * (1 - T_chi(y_m)) * zfac
    where T is the 1/2..3/4 transition profile and T_chi the transition
    over [chi_inner, chi_outer].
    """
    B, m = x.shape
    y = np.empty(B)
    for q in range(B):
        base = amp * np.sin(np.pi * x[q, 0] / (2.0 * delta)) * zfac
        for i in range(m - 1):
            base *= _transition((1.0 - abs(x[q, i])) / eps, coeffs, 0.5, 0.75)
        target = x[q, m - 1]
        if base == 0.0:
            y[q] = target
            continue
        lo = target - abs(base) - 1e-12
        hi = target + abs(base) + 1e-12
        # residual is increasing in y_m (certified by the amplitude rule)
        for _ in range(maxit):
            mid = 0.5 * (lo + hi)
            chi = 1.0 - _transition(mid, coeffs, chi_inner, chi_outer)
            res = mid + base * chi - target
            if res > 0.0:
                hi = mid
            else:
                lo = mid
            if hi - lo < tol:
                break
        y[q] = 0.5 * (lo + hi)
    return y


def _transition_numpy(u, coeffs, inner, outer):
    a = np.abs(u)
    s = np.clip((a - inner) / (outer - inner), 0.0, 1.0)
    val = smoothstep_numpy(coeffs, s)
    return np.where(a <= inner, 0.0, np.where(a >= outer, 1.0, val))


def _solve_last_numpy(x, amp, eps, delta, zfac, coeffs, dcoeffs,
                      chi_inner, chi_outer, tol, maxit):
    B, m = x.shape
    base = amp * np.sin(np.pi * x[:, 0] / (2.0 * delta)) * zfac
    for i in range(m - 1):
        base = base * _transition_numpy((1.0 - np.abs(x[:, i])) / eps, coeffs, 0.5, 0.75)
    target = x[:, m - 1]
    lo = target - np.abs(base) - 1e-12
    hi = target + np.abs(base) + 1e-12
    for _ in range(maxit):
        mid = 0.5 * (lo + hi)
        chi = 1.0 - _transition_numpy(mid, coeffs, chi_inner, chi_outer)
        res = mid + base * chi - target
        pos = res > 0.0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
        if np.all(hi - lo < tol):
            break
    y = 0.5 * (lo + hi)
    return np.where(base == 0.0, target, y)


def solve_last_coordinate(x, amp, eps, delta, zfac, coeffs, chi_inner, chi_outer,
                          tol=1e-13, maxit=200, use_numba=None):
    x = np.ascontiguousarray(x, dtype=np.float64)
    coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
    dcoeffs = np.polynomial.polynomial.polyder(coeffs)
    if use_numba is None:
        use_numba = USE_NUMBA
    fn = _solve_last_numba if use_numba else _solve_last_numpy
    return fn(x, float(amp), float(eps), float(delta), float(zfac), coeffs, dcoeffs,
              float(chi_inner), float(chi_outer), float(tol), int(maxit))
