"""Acceptance criteria 1-10, each at its stated tolerance and time limit.

Every test records one line in ``RESULTS``; the conftest hook prints them as
a block at the end of the session.  Run this file alone with

    pytest tests/test_acceptance.py -v

A criterion that misses its tolerance or its time limit fails the test.
"""
from __future__ import annotations

import itertools
import random
import time
from fractions import Fraction
from math import factorial

import mpmath
import numpy as np
import pytest
import sympy as sp

from jetlab.localmodels import (approximate_top_order, build_wiggle_isotopy,
                                parametric_transverse_approximate, transversality_adjust,
                                transverse_approximate)
from jetlab.localmodels.transverse import OP_MARGIN, TIMES, shell_points
from jetlab.polyjet import GridSpec, holonomy_defect, jets_equal, taylor_evaluate
from jetlab.polyjet.expression import Expr, VectorField, coords, cos, exp, plateau, sin
from jetlab.polyjet.multiindex import basis
from jetlab.primitive import (Diffeo, PrimitiveSection, TopOrderSection, beta_terms,
                              decompose_top_order, jet_pullback, jet_pushforward,
                              merge_redundant, power_sum_expand, recombine, weight_residual)
from jetlab.verify import bound_check, diagonal_lattice, probe_holonomy

RESULTS: dict[int, str] = {}

LATTICE = [(e, q) for e in (0.2, 0.1, 0.05) for q in (0.1, 0.05)]


def bump(m=2, inner=0.3, outer=0.8):
    x = coords(m)
    e = plateau(x[0], inner, outer)
    for i in range(1, m):
        e = e * plateau(x[i], inner, outer)
    return e


class Criterion:
    """Times a block and turns (ok, detail) into a recorded pass/fail line."""

    def __init__(self, number: int, title: str, limit: float):
        self.number, self.title, self.limit = number, title, limit
        self.ok, self.detail = True, ""

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def require(self, cond: bool, what: str):
        if not cond:
            self.ok = False
            self.detail += ("; " if self.detail else "") + what

    def __exit__(self, exc_type, exc, tb):
        dt = time.perf_counter() - self.t0
        if exc_type is not None:
            self.ok = False
            self.detail = f"{exc_type.__name__}: {exc}"
        elif dt >= self.limit:
            self.ok = False
            self.detail += ("; " if self.detail else "") + f"over the time limit"
        status = "PASS" if self.ok else "FAIL"
        line = (f"criterion {self.number:>2} {status}  {dt:7.1f}s / {self.limit:g}s  "
                f"{self.title}" + (f"  [{self.detail}]" if self.detail else ""))
        RESULTS[self.number] = line
        print(line)
        if exc_type is None:
            assert self.ok, line
        return False


# --------------------------------------------------------------------- 1

def _random_rational_field(rng, m):
    x = coords(m)
    e = Expr.const(Fraction(rng.randint(-6, 6), rng.randint(1, 5)))
    for _ in range(rng.randint(0, 2)):
        t = Expr.const(Fraction(rng.randint(-4, 4), rng.randint(1, 4)))
        for _ in range(rng.randint(1, 2)):
            t = t * x[rng.randrange(m)]
        e = e + t
    return VectorField([e])


def test_criterion_1_decomposition_exactness():
    rng = random.Random(1)
    with Criterion(1, "decomposition reconstructs exactly; term count fixed per (m, r)",
                   10) as c:
        counts: dict = {}
        bad = 0
        for _ in range(200):
            m, r = rng.randint(1, 3), rng.randint(1, 4)
            alphas = list(itertools.combinations_with_replacement(range(m), r))
            chosen = rng.sample(alphas, rng.randint(1, len(alphas)))
            sigma = TopOrderSection(m, r, {a: _random_rational_field(rng, m) for a in chosen})
            terms = decompose_top_order(sigma)
            counts.setdefault((m, r), set()).add(len(terms))
            pts = [[Fraction(rng.randint(-9, 9), 7) for _ in range(m)] for _ in range(2)]
            if not jets_equal(recombine(terms, pts, exact=True), sigma.evaluate(pts, exact=True)):
                bad += 1
            const = {a: Fraction(rng.randint(-9, 9), rng.randint(1, 9)) for a in chosen}
            if any(v != 0 for v in weight_residual(const, m, r).coeffs[:, 0]):
                bad += 1
        c.require(bad == 0, f"{bad} inexact reconstructions")
        fixed = all(len(s) == 1 and s == {len(beta_terms(m, r))} for (m, r), s in counts.items())
        c.require(fixed, f"term counts vary: {counts}")


# --------------------------------------------------------------------- 2

def test_criterion_2_power_sum_identity():
    with Criterion(2, "power-sum identity and the difference of squares, exact", 1) as c:
        lhs = (power_sum_expand((0, 1), 2) - power_sum_expand((0,), 2, 2)
               - power_sum_expand((1,), 2, 2)).scale(Fraction(1, 2))
        want = [Fraction(1) if a == (1, 1) else Fraction(0) for a in basis(2, 2).indices]
        c.require(list(lhs.coeffs[:, 0]) == want, "X1 X2 identity")
        sigma = TopOrderSection.from_polynomial(2, 2, {(2, 0): 1, (0, 2): -1})
        merged = merge_redundant(decompose_top_order(sigma))
        dirs = sorted(tuple(int(w) for w in t.constant_conormal) for t in merged)
        c.require(dirs == [(0, 1), (1, 0)], f"merged directions {dirs}")
        pts = [[Fraction(1, 3), Fraction(-2, 5)]]
        c.require(jets_equal(recombine(merged, pts, exact=True), sigma.evaluate(pts, exact=True)),
                  "x^2 - y^2 = x^2 + (-y^2)")


# --------------------------------------------------------------------- 3

Y = sp.symbols("y0:2")


def _random_poly(rng):
    x = coords(2)
    e, s = Expr.const(0), sp.Integer(0)
    for _ in range(rng.randint(1, 5)):
        c = rng.randint(-5, 5)
        t, ts = Expr.const(c), sp.Integer(c)
        for _ in range(rng.randint(0, 4)):
            i = rng.randrange(2)
            t, ts = t * x[i], ts * Y[i]
        e, s = e + t, s + ts
    return e, s


def _random_smooth(rng, depth=3):
    """A random expression tree and a matching mpmath callable."""
    x = coords(2)
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.6:
            i = rng.randrange(2)
            return x[i], (lambda p, i=i: p[i])
        c = rng.randint(-3, 3) / 2
        return Expr.const(c), (lambda p, c=c: mpmath.mpf(c))
    op = rng.choice(["add", "mul", "sin", "cos", "exp"])
    a, fa = _random_smooth(rng, depth - 1)
    if op in ("add", "mul"):
        b, fb = _random_smooth(rng, depth - 1)
        if op == "add":
            return a + b, (lambda p: fa(p) + fb(p))
        return a * b, (lambda p: fa(p) * fb(p))
    if op == "exp":
        # keep the argument bounded so values stay moderate
        return exp(sin(a)), (lambda p: mpmath.exp(mpmath.sin(fa(p))))
    g, mg = (sin, mpmath.sin) if op == "sin" else (cos, mpmath.cos)
    return g(a), (lambda p: mg(fa(p)))


def test_criterion_3_jet_arithmetic_oracle():
    rng = random.Random(3)
    with Criterion(3, "taylor_evaluate vs sympy (exact) and vs finite differences", 30) as c:
        bad_exact = 0
        for _ in range(100):
            e, s = _random_poly(rng)
            x = [Fraction(rng.randint(-7, 7), rng.randint(1, 5)) for _ in range(2)]
            r = rng.randint(0, 4)
            jet = taylor_evaluate(e, [x], r, exact=True)
            subs = {Y[i]: sp.Rational(x[i].numerator, x[i].denominator) for i in range(2)}
            for alpha in basis(2, r).indices:
                d = sp.diff(s, Y[0], alpha[0], Y[1], alpha[1]) if any(alpha) else s
                if jet.D(alpha)[0] != Fraction(str(d.subs(subs))):
                    bad_exact += 1
        c.require(bad_exact == 0, f"{bad_exact} exact mismatches")

        mpmath.mp.dps = 30
        worst = 0.0
        for _ in range(100):
            e, f = _random_smooth(rng)
            p = [rng.uniform(-0.8, 0.8) for _ in range(2)]
            jet = taylor_evaluate(e, [p], 3)
            for alpha in basis(2, 3).indices:
                fd = float(mpmath.diff(lambda a, b: f((a, b)), (mpmath.mpf(p[0]), mpmath.mpf(p[1])),
                                       alpha))
                got = float(jet.D(alpha)[0])
                worst = max(worst, abs(got - fd) / max(abs(fd), 1e-6))
        c.require(worst < 1e-4, f"finite-difference relative error {worst:.2e}")
        c.detail = c.detail or f"max FD relative error {worst:.1e}"


# --------------------------------------------------------------------- 4

def _random_affine(rng, m):
    while True:
        A = sp.Matrix(m, m, lambda i, j: sp.Rational(rng.randint(-4, 4), rng.randint(1, 3)))
        if A.det() != 0:
            break
    b = sp.Matrix(m, 1, lambda i, j: sp.Rational(rng.randint(-4, 4), rng.randint(1, 5)))
    Ai = A.inv()
    x = coords(m)
    F = lambda M, v: [sum((Expr.const(Fraction(int(M[i, j].p), int(M[i, j].q))) * x[j]
                           for j in range(m)), Expr.const(Fraction(int(v[i].p), int(v[i].q))))
                      for i in range(m)]
    return Diffeo(F(A, b), inverse=F(Ai, -Ai * b))


def _random_h(rng, m, exact):
    x = coords(m)
    h = Expr.const(Fraction(rng.randint(-3, 3), 2) if exact else rng.uniform(-1, 1))
    for _ in range(4):
        c = Fraction(rng.randint(-5, 5), rng.randint(1, 4)) if exact else rng.uniform(-1, 1)
        t = Expr.const(c)
        for _ in range(rng.randint(1, 3)):
            t = t * x[rng.randrange(m)]
        h = h + t
    return h


def test_criterion_4_pullback_round_trip():
    rng = random.Random(4)
    with Criterion(4, "F_* F^* = id: exact for affine, < 1e-9 for polynomial diffeos", 10) as c:
        inexact = 0
        for m in (1, 2, 3):
            for _ in range(5):
                F = _random_affine(rng, m)
                pts = [[Fraction(rng.randint(-5, 5), 6) for _ in range(m)] for _ in range(2)]
                s = taylor_evaluate(_random_h(rng, m, True), pts, 3, exact=True)
                if not (jets_equal(jet_pushforward(F, jet_pullback(F, s)), s)
                        and jets_equal(jet_pullback(F, jet_pushforward(F, s)), s)):
                    inexact += 1
        c.require(inexact == 0, f"{inexact} affine round trips inexact")
        worst = 0.0
        x = coords(2)
        for _ in range(20):
            comps = []
            for i in range(2):
                e = x[i]
                for _ in range(3):
                    t = Expr.const(rng.uniform(-0.15, 0.15))
                    for _ in range(rng.randint(2, 3)):
                        t = t * x[rng.randrange(2)]
                    e = e + t
                comps.append(e)
            F = Diffeo(comps)
            pts = np.array([[rng.uniform(-0.5, 0.5) for _ in range(2)] for _ in range(4)])
            s = taylor_evaluate(_random_h(rng, 2, False), pts, 3)
            back = jet_pullback(F, jet_pushforward(F, s))
            worst = max(worst, float(np.max(np.abs(back.coeff_array() - s.coeff_array()))),
                        float(np.max(np.abs(back.base - s.base))))
        c.require(worst < 1e-9, f"polynomial round-trip error {worst:.2e}")
        c.detail = c.detail or f"max polynomial round-trip error {worst:.1e}"


# --------------------------------------------------------------------- 5

def _eight_per_delta(W):
    n1 = int(round(2 / W.delta * 8)) + 1
    axes = [np.linspace(-1, 1, n1), np.linspace(-1, 1, 65)]
    return np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)


def test_criterion_5_isotopy_contract():
    with Criterion(5, "wiggle: C0-small, identity near the boundary, first row fixed, "
                      "injective", 60) as c:
        for eps, q in LATTICE:
            W = build_wiggle_isotopy(2, eps, q * eps)
            pts = _eight_per_delta(W)
            shell = shell_points(2, OP_MARGIN * eps)
            tag = f"eps={eps} delta/eps={q}"
            for t in TIMES:
                c.require(float(np.max(np.abs(W(pts, t) - pts))) < eps, f"{tag}: displacement")
                c.require(np.array_equal(W(shell, t), shell), f"{tag}: boundary moved")
                first = W.jet(pts, 1, t).components[0]
                row_ok = (np.all(first.derivative_value((1, 0)) == 1.0)
                          and np.all(first.derivative_value((0, 1)) == 0.0))
                c.require(bool(row_ok), f"{tag}: first row of dF_t")
            cert = W.certificate
            c.require(cert["certified_injective"] and cert["measured_min"] > 0,
                      f"{tag}: injectivity certificate")


# --------------------------------------------------------------------- 6

def test_criterion_6_estimate_family_stability():
    sig = PrimitiveSection(VectorField([bump()]), [1, 0], 2)
    with Criterion(6, "bound ratios h_mixed, dF, phi, b: max/min < 4 over the lattice",
                   300) as c:
        ratios = {k: [] for k in ("h_mixed", "dF", "phi", "b")}
        for eps, q in LATTICE:
            W = build_wiggle_isotopy(2, eps, q * eps)
            ratios["h_mixed"].append(bound_check("h_mixed", sig, delta=W.delta).ratio)
            ratios["dF"].append(bound_check("dF", W).ratio)
            ratios["phi"].append(bound_check("phi", W, r=2).ratio)
            ratios["b"].append(bound_check("b", (W.eps, W.delta)).ratio)
        bands = {k: max(v) / min(v) for k, v in ratios.items()}
        for k, b in bands.items():
            c.require(b < 4, f"{k} band {b:.3g}")
        c.detail = c.detail or "bands " + ", ".join(f"{k} {b:.3f}" for k, b in bands.items())


# --------------------------------------------------------------------- 7

def test_criterion_7_conclusion_scaling():
    v = VectorField([bump()])
    with Criterion(7, "c0 and perp decrease along the diagonal; ratios in a factor-2 band",
                   600) as c:
        notes = []
        for r in (1, 2):
            c0, perp, rc, rp = [], [], [], []
            for p in diagonal_lattice(0.2, 0.1, 3):
                res = transverse_approximate(PrimitiveSection(v, [1, 0], r), 1, p["eps"],
                                             p["delta"])
                e, d = res.params["eps"], res.params["delta"]
                c0.append(res.measurements["c0_error_uprime"])
                perp.append(res.measurements["perp_sup"])
                rc.append(c0[-1] / (e + d / e))
                rp.append(perp[-1] / (d / e))
            c.require(all(b < a for a, b in zip(c0, c0[1:])), f"r={r}: c0 not decreasing {c0}")
            c.require(all(b < a for a, b in zip(perp, perp[1:])),
                      f"r={r}: perp not decreasing {perp}")
            bc, bp = max(rc) / min(rc), max(rp) / min(rp)
            c.require(bc < 2, f"r={r}: c0 band {bc:.3g}")
            c.require(bp < 2, f"r={r}: perp band {bp:.3g}")
            notes.append(f"r={r} bands c0 {bc:.3f} perp {bp:.3f}")
        c.detail = c.detail or "; ".join(notes)


# --------------------------------------------------------------------- 8

def test_criterion_8_transversality_adjustment():
    v = VectorField([bump()])
    with Criterion(8, "adjustment error/(theta + delta) in a factor-2 band; exact at "
                      "x_m = 0", 120) as c:
        notes = []
        for r in (1, 2):
            ratios = []
            for theta in (0.0, 0.05, 0.1, 0.2):
                for delta in (0.02, 0.01):
                    u = [np.sin(theta), np.cos(theta)]
                    res = transversality_adjust(PrimitiveSection(v, u, r), delta, 1)
                    ratios.append(res.measurements["ratio_dist"])
            band = max(ratios) / min(ratios)
            c.require(band < 2, f"r={r}: band {band:.3g}")
            notes.append(f"r={r} band {band:.3f}")
            const = PrimitiveSection(VectorField([Expr.const(Fraction(3, 2))]), [0, 1], r)
            res = transversality_adjust(const, 0.02, 1, measure=False)
            pts = np.column_stack([np.linspace(-1, 1, 201), np.zeros(201)])
            a, b = res.sigma_hat.evaluate(pts), const.evaluate(pts)
            c.require(all(np.array_equal(p.coeffs, q.coeffs)
                          for p, q in zip(a.components, b.components)),
                      f"r={r}: not exact at x_m = 0")
        c.detail = c.detail or "; ".join(notes)


# --------------------------------------------------------------------- 9

def test_criterion_9_holonomy_detector():
    v = VectorField([bump()])
    with Criterion(9, "defect of every approximation falls under halving; input defect "
                      "-> r!|v|", 120) as c:
        probes = 0
        for r in (1, 2):
            sig = PrimitiveSection(v, [1, 0], r)
            for eps, delta in ((0.2, 0.02), (0.1, 0.005)):
                res = transverse_approximate(sig, 1, eps, delta, measure=False)
                tr = probe_holonomy(res.sigma_hat, 2, 1, res.params["delta"])
                c.require(tr.decreasing, f"transverse r={r} eps={eps}: {tr.defects}")
                probes += 1
                for theta in (0.0, 0.1):
                    adj = transversality_adjust(PrimitiveSection(v, [np.sin(theta),
                                                                     np.cos(theta)], r),
                                                delta, 1, measure=False)
                    tr = probe_holonomy(adj.sigma_hat, 2, 1, delta)
                    c.require(tr.decreasing, f"adjust r={r} theta={theta}: {tr.defects}")
                    probes += 1
            # nonconstant primitive input: the defect tends to r! |v|
            errs = []
            for n in (9, 17, 33):
                g = GridSpec((n, n), (0.3, -0.2), (0.8, 0.6))
                h = holonomy_defect(sig, g)
                want = factorial(r) * np.abs(v.evaluate(g.points())[:, 0]).reshape(g.shape)
                inner = (slice(1, -1), slice(1, -1))
                rel = np.abs(h.field[inner] - want[inner]) / np.maximum(want[inner], 1e-3)
                errs.append(float(np.max(rel[want[inner] > 0.05])))
            c.require(errs[-1] < 0.05, f"r={r}: input defect off by {errs[-1]:.3g}")
        c.detail = c.detail or f"{probes} approximations probed"


# -------------------------------------------------------------------- 10

def test_criterion_10_orchestration_contract():
    x = coords(2)
    b = plateau(x[0], 0.2, 0.5) * plateau(x[1], 0.2, 0.5)
    sigma = TopOrderSection.from_polynomial(2, 2, {(2, 0): 1, (0, 2): -1}, b)
    with Criterion(10, "top-order run vanishes on the boundary, lower jet shrinks; "
                       "boundary z gives zero", 600) as c:
        low = []
        for eps in (0.1, 0.05, 0.025):
            res = approximate_top_order(sigma, 1, eps=eps, delta=eps * eps)
            c.require(res.checks["boundary_vanishing"], f"eps={eps}: boundary")
            c.require(res.checks["stages_ok"], f"eps={eps}: stage checks")
            low.append(res.measurements["lower_jet_sup"])
            if eps == 0.1:
                delta = min(s["params"]["delta"] for s in res.stages)
                tr = probe_holonomy(res.sigma_hat, 2, 1, delta)
                c.require(tr.decreasing, f"holonomy trend {tr.defects}")
        c.require(all(b2 < a for a, b2 in zip(low, low[1:])), f"lower jet sup {low}")

        fam = VectorField([bump(3)])
        out = parametric_transverse_approximate(fam, 2, 1, 1, 1, 0.2, 0.02,
                                                [[1.0], [-1.0], [0.95]])
        pts = np.stack([g.ravel() for g in np.meshgrid(np.linspace(-1, 1, 81),
                                                       np.linspace(-1, 1, 81))], axis=1)
        for z, res in out:
            jet = res.sigma_hat.evaluate(pts)
            c.require(all(np.all(p.coeffs == 0) for p in jet.components), f"z={z}: nonzero")
        c.detail = c.detail or "lower jet sup " + ", ".join(f"{v:.3g}" for v in low)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
