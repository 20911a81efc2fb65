"""Cutoff profiles and the numba/numpy kernel pairs."""
import json
import os
import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from jetlab import _kernels as K
from jetlab.polyjet.multiindex import basis
from jetlab.profiles import (PLATEAU, SMOOTHNESS, STEP, TRANSITION, Profile, smoothstep_coeffs,
                             smoothstep_derivs)


def test_smoothstep_matches_sympy_integral():
    # S is the normalized integral of s^N (1 - s)^N
    s = sp.symbols("s")
    N = SMOOTHNESS
    integrand = s ** N * (1 - s) ** N
    S = sp.integrate(integrand, (s, 0, s)) / sp.integrate(integrand, (s, 0, 1))
    want = sp.Poly(sp.expand(S), s).all_coeffs()[::-1]
    got = list(smoothstep_coeffs())
    assert [sp.Integer(c) for c in got] == want + [0] * (len(got) - len(want))


def test_smoothstep_endpoints_exact():
    vals = smoothstep_derivs([Fraction(0), Fraction(1)], SMOOTHNESS, exact=True)
    assert list(vals[0]) == [0, 1]
    for k in range(1, SMOOTHNESS + 1):
        assert list(vals[k]) == [0, 0]
    assert smoothstep_derivs([Fraction(1, 2)], 0, exact=True)[0][0] == Fraction(1, 2)


def test_profile_saturation_and_symmetry():
    t = np.linspace(-1.5, 1.5, 301)
    p = PLATEAU(t)
    assert np.all(p[np.abs(t) <= 0.5] == 1) and np.all(p[np.abs(t) >= 1] == 0)
    assert np.array_equal(p, PLATEAU(-t))
    q = TRANSITION(t)
    assert np.all(q[np.abs(t) <= 0.5] == 0) and np.all(q[np.abs(t) >= 0.75] == 1)
    s = STEP(t)
    assert np.all(s[t <= -1] == -1) and np.all(s[t >= 1] == 1)
    assert np.all(np.diff(s) >= 0)
    assert np.allclose(s, -STEP(-t), atol=1e-15)


@pytest.mark.parametrize("prof", [PLATEAU, TRANSITION, STEP, Profile("plateau", 0.2, 0.9)])
def test_profile_derivatives_match_finite_differences(prof):
    c = np.linspace(-1.1, 1.1, 157)
    d = prof.derivatives(c, 3)
    h = 1e-5
    for k in range(1, 4):
        lo = prof.derivatives(c - h, k - 1)[k - 1]
        hi = prof.derivatives(c + h, k - 1)[k - 1]
        fd = (hi - lo) / (2 * h)
        scale = max(1.0, float(np.max(np.abs(d[k]))))
        assert np.max(np.abs(fd - d[k])) < 1e-4 * scale


def test_exact_profile_derivatives_agree_with_float():
    c = [Fraction(k, 13) for k in range(-16, 17)]
    ex = PLATEAU.derivatives(np.array(c, dtype=object), 4)
    fl = PLATEAU.derivatives(np.array([float(x) for x in c]), 4)
    for a, b in zip(ex, fl):
        assert np.allclose(np.array(a, dtype=float), b, rtol=1e-12, atol=1e-12)


def test_sup_norms_examples():
    n = STEP.sup_norms(2)
    assert n[0] == 1.0
    # S' peaks at s = 1/2 with value (2N+1)!/(N!)^2 / 4^N; the step halves the slope range
    from math import factorial
    N = SMOOTHNESS
    peak = factorial(2 * N + 1) / factorial(N) ** 2 / 4 ** N
    assert n[1] == pytest.approx(peak, rel=1e-6)
    assert PLATEAU.sup_norms(1)[1] == pytest.approx(2 * peak, rel=1e-6)


def test_profile_rejects_bad_parameters():
    with pytest.raises(ValueError):
        Profile("plateau", 1.0, 0.5)
    with pytest.raises(ValueError):
        Profile("ramp")


# ----------------------------------------------------------------- kernels

@pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba not installed")
@pytest.mark.parametrize("m,r", [(1, 4), (2, 3), (3, 2), (2, 6)])
def test_truncated_mul_numba_matches_numpy(m, r):
    b = basis(m, r)
    rng = np.random.default_rng(m * 10 + r)
    x = rng.standard_normal((b.size, 17))
    y = rng.standard_normal((b.size, 17))
    got = K.truncated_mul_numba(x, y, b.ti, b.tj, b.tk)
    want = K.truncated_mul_numpy(x, y, b.rows_j, b.rows_k)
    assert np.allclose(got, want, rtol=1e-13, atol=1e-13)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=20))
def test_smoothstep_kernel_matches_profiles(s):
    c = np.asarray(smoothstep_coeffs(), dtype=np.float64)
    assert np.allclose(K.smoothstep_numpy(c, s), smoothstep_derivs(s, 0)[0], atol=1e-14)


@pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba not installed")
def test_solve_last_coordinate_paths_agree():
    rng = np.random.default_rng(3)
    eps, delta = 0.1, 0.01
    x = np.column_stack([rng.uniform(-1, 1, 500), rng.uniform(-eps, eps, 500)])
    c = np.asarray(smoothstep_coeffs(), dtype=np.float64)
    args = (x, 0.5 * eps, eps, delta, 1.0, c, eps, 1 - eps / 2)
    a = K.solve_last_coordinate(*args, use_numba=True)
    b = K.solve_last_coordinate(*args, use_numba=False)
    assert np.max(np.abs(a - b)) < 1e-11


@pytest.mark.parametrize("flag,expect", [("1", False), ("0", K.HAVE_NUMBA)])
def test_env_var_selects_backend(flag, expect):
    code = "import json; from jetlab._kernels import USE_NUMBA; print(json.dumps(USE_NUMBA))"
    env = dict(os.environ, JETLAB_DISABLE_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True)
    assert json.loads(out.stdout) is expect


def test_exact_blocks_bypass_numba():
    from jetlab.polyjet.truncpoly import TruncatedPoly
    a = TruncatedPoly.variable(2, 3, 0, Fraction(1, 3), exact=True)
    p = a * a
    assert p.exact and p[(2, 0)] == 1 and p[(1, 0)] == Fraction(2, 3)
