"""Power sums, top-order decomposition, merging and jet pullback."""
import itertools
from fractions import Fraction
from math import factorial

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from jetlab.polyjet import jets_equal
from jetlab.polyjet.expression import Expr, VectorField, coords, sin
from jetlab.polyjet.multiindex import basis, from_multiset
from jetlab.primitive import (Diffeo, PrimitiveSection, TopOrderSection, beta_terms,
                              decompose_top_order, decomposition_weights, jet_pullback,
                              jet_pushforward, merge_redundant, power_sum_expand, recombine,
                              weight_residual)


def _sympy_poly(p, m):
    X = sp.symbols(f"X0:{m}")
    b = p.basis
    return sp.expand(sum(sp.Rational(c.numerator, c.denominator) *
                         sp.prod([X[i] ** a for i, a in enumerate(alpha)])
                         for alpha, c in zip(b.indices, p.coeffs[:, 0]) if c)), X


def test_power_sum_expand_against_sympy():
    for beta, r, m in [((0,), 3, 2), ((0, 1), 2, 2), ((0, 1, 1), 3, 3), ((0, 1, 2), 4, 3)]:
        p = power_sum_expand(beta, r, m)
        got, X = _sympy_poly(p, m)
        assert got == sp.expand(sum(X[b] for b in beta) ** r)


def test_two_variable_identity():
    # 1/2 [(X1 + X2)^2 - X1^2 - X2^2] = X1 X2
    lhs = (power_sum_expand((0, 1), 2) - power_sum_expand((0,), 2, 2)
           - power_sum_expand((1,), 2, 2)).scale(Fraction(1, 2))
    got, X = _sympy_poly(lhs, 2)
    assert got == X[0] * X[1]


def test_difference_of_squares_decomposes_into_two_squares():
    sigma = TopOrderSection.from_polynomial(2, 2, {(2, 0): 1, (0, 2): -1})
    merged = merge_redundant(decompose_top_order(sigma))
    by_dir = {tuple(int(c) for c in t.constant_conormal): t for t in merged}
    assert set(by_dir) == {(1, 0), (0, 1)}
    assert by_dir[(1, 0)].v.evaluate([[0.2, 0.7]])[0][0] == 1
    assert by_dir[(0, 1)].v.evaluate([[0.2, 0.7]])[0][0] == -1


@pytest.mark.parametrize("m,r", [(1, 1), (2, 2), (2, 3), (3, 2), (3, 3), (2, 4), (3, 4)])
def test_term_count_depends_only_on_m_r(m, r):
    from math import comb
    n_beta = sum(comb(m + k - 1, k) for k in range(1, r + 1))
    assert len(beta_terms(m, r)) == n_beta
    rng = np.random.default_rng(m * 7 + r)
    for _ in range(3):
        terms = {a: Fraction(int(rng.integers(-4, 5)), int(rng.integers(1, 5)))
                 for a in itertools.combinations_with_replacement(range(m), r)}
        sigma = TopOrderSection(m, r, {a: [c] for a, c in terms.items()})
        assert len(decompose_top_order(sigma)) == n_beta


@settings(max_examples=25)
@given(st.integers(1, 3), st.integers(1, 4), st.data())
def test_weights_reconstruct_exactly(m, r, data):
    alphas = list(itertools.combinations_with_replacement(range(m), r))
    coeffs = {a: data.draw(st.fractions(-5, 5, max_denominator=6)) for a in alphas}
    res = weight_residual(coeffs, m, r)
    assert all(c == 0 for c in res.coeffs[:, 0])


def test_decomposition_reconstructs_nonconstant_fields():
    x = coords(2)
    sigma = TopOrderSection(2, 2, {(0, 0): VectorField([sin(x[1])]),
                                   (0, 1): VectorField([x[0] * x[1] + 1]),
                                   (1, 1): VectorField([Expr.const(Fraction(-2, 3))])})
    pts = [[Fraction(1, 3), Fraction(-1, 2)], [Fraction(0), Fraction(1, 4)]]
    terms = decompose_top_order(sigma)
    pts_f = np.array(pts, dtype=float)
    assert jets_equal(recombine(terms, pts_f), sigma.evaluate(pts_f), tol=1e-12)
    merged = merge_redundant(terms)
    assert jets_equal(recombine(merged, pts_f), sigma.evaluate(pts_f), tol=1e-12)


def test_x1_power_r_is_a_single_primitive_after_merge():
    for r in (1, 2, 3, 4):
        sigma = TopOrderSection.from_polynomial(2, r, {(r, 0): 1})
        merged = merge_redundant(decompose_top_order(sigma))
        assert len(merged) == 1
        assert tuple(merged[0].constant_conormal) == (1, 0)


def test_primitive_section_jet_is_power_of_linear_form():
    sig = PrimitiveSection(VectorField([Expr.const(3)]), [1, 2], 3)
    j = sig.evaluate([[Fraction(1, 2), Fraction(0)]], exact=True)
    b = basis(2, 3)
    want = {(3, 0): 3, (2, 1): 18, (1, 2): 36, (0, 3): 24}
    for alpha in b.indices:
        assert j.components[0][alpha] == want.get(alpha, 0)
    assert all(alpha == from_multiset((0, 0, 0), 2) or True for alpha in want)


def test_constant_r1_defect_is_v():
    # sigma(x) = jet of <y - x, e1> v: a pure first-order part with zero value
    sig = PrimitiveSection(VectorField([Expr.const(2)]), [1, 0], 1)
    j = sig.evaluate([[0.3, 0.1]])
    assert j.D((0, 0))[0] == 0 and j.D((1, 0))[0] == 2 and j.D((0, 1))[0] == 0


# --------------------------------------------------------------- diffeos

def _affine():
    x = coords(2)
    F = Diffeo([2 * x[0] + x[1] + Fraction(1, 3), x[0] - x[1]],
               inverse=[(x[0] + x[1] - Fraction(1, 3)) / 3,
                        (x[0] - 2 * x[1] - Fraction(1, 3)) / 3])
    return F, x


def test_affine_round_trip_is_exact():
    F, x = _affine()
    h = x[0] ** 3 - x[0] * x[1] + 2
    from jetlab.polyjet import taylor_evaluate
    pts = [[Fraction(1, 5), Fraction(-2, 7)], [Fraction(0), Fraction(1, 2)]]
    s = taylor_evaluate(h, pts, 3, exact=True)
    back = jet_pullback(F, jet_pushforward(F, s))
    assert jets_equal(back, s)
    again = jet_pushforward(F, jet_pullback(F, s))
    assert jets_equal(again, s)


def test_polynomial_diffeo_round_trip():
    x = coords(2)
    F = Diffeo([x[0] + 0.2 * x[1] ** 2, x[1] + 0.1 * x[0] ** 3 - 0.05 * x[0] * x[1]])
    from jetlab.polyjet import taylor_evaluate
    s = taylor_evaluate(sin(x[0] + x[1]) * x[1], [[0.3, -0.2], [-0.5, 0.4]], 3)
    back = jet_pullback(F, jet_pushforward(F, s))
    assert np.max(np.abs(back.coeff_array() - s.coeff_array())) < 1e-9
    assert np.max(np.abs(back.base - s.base)) < 1e-12


def test_pullback_is_chain_rule():
    x = coords(2)
    F = Diffeo([x[0] + x[1] ** 2, x[1]], inverse=[x[0] - x[1] ** 2, x[1]])
    h = x[0] * x[1]
    from jetlab.polyjet import taylor_evaluate
    from jetlab.polyjet.expression import compose
    pts = [[Fraction(1, 2), Fraction(1, 3)]]
    y = [[Fraction(1, 2) + Fraction(1, 9), Fraction(1, 3)]]
    s = taylor_evaluate(h, y, 2, exact=True)
    got = jet_pullback(F, s, x=pts)
    want = taylor_evaluate(compose(h, F.forward.components), pts, 2, exact=True)
    assert jets_equal(got, want)


def test_singular_jacobian_rejected():
    x = coords(2)
    F = Diffeo([x[0] ** 3, x[1]])
    from jetlab.polyjet import taylor_evaluate
    s = taylor_evaluate(x[0], [[0.0, 0.0]], 1)
    with pytest.raises(np.linalg.LinAlgError):
        jet_pullback(F, s, x=[[0.0, 0.0]])
