"""Wiggle isotopy, transverse model, tangent adjustment and the orchestration."""
import numpy as np
import pytest

from jetlab.localmodels import (AngleError, InjectivityError, PolynomialSection, StageError,
                                SupportError, admissible_delta, adjusted_normal,
                                approximate_primitive, approximate_top_order,
                                build_wiggle_isotopy, cutoff_phi, default_schedule,
                                parametric_transverse_approximate, reduce_order,
                                transversality_adjust, transverse_approximate,
                                transverse_frame)
from jetlab.localmodels.isotopy import injectivity_grid, measured_injectivity
from jetlab.localmodels.transverse import shell_points
from jetlab.polyjet import GridSpec, holonomy_defect
from jetlab.verify import holonomy_trend, probe_centre
from jetlab.polyjet.expression import Expr, VectorField, coords
from jetlab.primitive import PrimitiveSection, TopOrderSection

from conftest import bump


# ----------------------------------------------------------------- isotopy

def test_admissible_delta_tiles_the_interval():
    for d in (0.3, 0.1, 0.05, 0.011, 0.005):
        a, J = admissible_delta(d)
        assert a <= d and a == 1 / (2 * J + 1)
        assert 1 / (2 * J - 1) > d
    with pytest.raises(ValueError):
        admissible_delta(1.5)


@pytest.mark.parametrize("eps,ratio", [(0.2, 0.1), (0.1, 0.05)])
def test_wiggle_contract(eps, ratio):
    W = build_wiggle_isotopy(2, eps, eps * ratio)
    pts = injectivity_grid(W, per_delta=8, other=33)
    for t in (0.0, 0.5, 1.0):
        assert np.max(np.abs(W(pts, t) - pts)) < eps
    shell = shell_points(2, 0.4 * eps)
    assert np.array_equal(W(shell, 1.0), shell)
    J = W.jet(pts[::7], 1)
    first = J.components[0]
    assert np.all(first.derivative_value((1, 0)) == 1) and np.all(first.derivative_value((0, 1)) == 0)
    assert W.certificate["certified_injective"]
    assert measured_injectivity(W, pts) >= W.certified_min() - 1e-12
    back = W.inverse(W(pts))
    assert np.max(np.abs(back - pts)) < 1e-11


def test_wiggle_rejects_large_amplitude_and_bad_parameters():
    with pytest.raises(InjectivityError):
        build_wiggle_isotopy(2, 0.2, 0.02, amplitude=40.0)
    with pytest.raises(ValueError):
        build_wiggle_isotopy(1, 0.1, 0.01)
    with pytest.raises(ValueError, match="delta"):
        build_wiggle_isotopy(2, 0.1, 0.2)


def test_cutoff_is_one_on_the_wiggled_slab_and_zero_off_it():
    W = build_wiggle_isotopy(2, 0.2, 0.02)
    near = np.column_stack([np.linspace(-0.9, 0.9, 41), np.full(41, 0.02)])
    assert np.all(cutoff_phi(W, W(near)) == 1)
    far = np.column_stack([np.linspace(-0.9, 0.9, 41), np.full(41, 0.04)])
    assert np.all(cutoff_phi(W, W(far)) == 0)


# --------------------------------------------------------------- transverse

def test_transverse_checks_and_holonomy():
    sig = PrimitiveSection(VectorField([bump(2)]), [1, 0], 1)
    res = transverse_approximate(sig, 1, 0.2, 0.02, per_delta=4, per_eps=8, other=9)
    assert res.ok, res.checks
    m = res.measurements
    assert m["max_displacement"] < 0.2
    assert m["c0_error_uprime"] > 0 and m["perp_sup"] > 0
    # the defect is a discretization artefact: it shrinks as the grid is refined
    centre = probe_centre(res.sigma_hat, 2, 1)
    trend = holonomy_trend(res.sigma_hat, centre, res.isotopy.delta / 4)
    assert trend.decreasing, trend.defects


def test_transverse_zero_field_gives_zero():
    sig = PrimitiveSection(VectorField([Expr.const(0)]), [1, 0], 1)
    res = transverse_approximate(sig, 1, 0.2, 0.02, per_delta=4, per_eps=8, other=9)
    assert res.measurements["c0_error_uprime"] == 0 and res.measurements["perp_sup"] == 0


def test_transverse_requires_compact_support():
    sig = PrimitiveSection(VectorField([Expr.const(1)]), [1, 0], 1)
    with pytest.raises(SupportError):
        transverse_approximate(sig, 1, 0.2, 0.02)


def test_transverse_matches_sigma_along_e1_on_the_core():
    # at x_m = 0, x_1 = 2 j delta only the d/dx_m slot (the perp part) differs
    sig = PrimitiveSection(VectorField([bump(2, 0.5, 0.75)]), [1, 0], 1)
    res = transverse_approximate(sig, 1, 0.2, 0.02, measure=False)
    d = res.isotopy.delta
    pts = np.array([[2 * j * d, 0.0] for j in range(-5, 6)])
    a, b = res.sigma_hat.evaluate(pts), sig.evaluate(pts)
    for alpha in [(0, 0), (1, 0)]:
        assert np.array_equal(a.D(alpha), b.D(alpha))
    assert np.all(np.abs(a.D((0, 1))) > 0)


def test_parametric_boundary_parameters_are_zero():
    fam = VectorField([bump(3)])
    out = parametric_transverse_approximate(fam, 2, 1, 1, 1, 0.2, 0.02, [[0.0], [1.0]],
                                            per_delta=4, per_eps=8, other=9)
    (z0, r0), (z1, r1) = out
    assert r0.measurements["perp_sup"] > 0
    assert r1.checks["boundary_z_zero"] and r1.checks["boundary_z_identity"]


def test_parametric_family_must_vanish_where_the_wiggle_is_damped():
    x = coords(3)
    fam = VectorField([bump(2) * (1 - 0.5 * x[2] ** 2)])
    with pytest.raises(SupportError, match="damped"):
        parametric_transverse_approximate(fam, 2, 1, 1, 1, 0.2, 0.02, [[1.0]])


# ------------------------------------------------------------------ adjust

def test_adjusted_normal_is_orthogonal_to_the_face():
    u = np.array([0.1, 1.0]) / np.hypot(0.1, 1.0)
    n = adjusted_normal(u, 1)
    assert n[0] == 0 and np.isclose(np.linalg.norm(n), 1) and n @ u > 0


def test_transversality_adjust_small_angle():
    sig = PrimitiveSection(VectorField([bump(2)]), [0.1, 1.0], 2)
    res = transversality_adjust(sig, 0.02, 1, per_axis=21, norm_grid=11)
    assert res.checks["support_band"]
    assert res.measurements["ratio_dist"] < 10
    g = GridSpec((9, 9), (-0.3, -0.004), (0.3, 0.004))
    assert holonomy_defect(res.sigma_hat, g).interior_max < 1e-6


def test_transversality_adjust_exact_at_zero_angle():
    sig = PrimitiveSection(VectorField([bump(2, 0.5, 0.75)]), [0, 1.0], 2)
    res = transversality_adjust(sig, 0.02, 1, measure=False)
    pts = np.column_stack([np.linspace(-0.4, 0.4, 9), np.zeros(9)])
    a, b = res.sigma_hat.evaluate(pts), sig.evaluate(pts)
    assert np.array_equal(a.components[0].coeffs, b.components[0].coeffs)


def test_transversality_adjust_rejects_large_angle():
    sig = PrimitiveSection(VectorField([bump(2)]), [1.0, 1.0], 1)
    with pytest.raises(AngleError):
        transversality_adjust(sig, 0.02, 1)


# -------------------------------------------------------------- orchestrate

def test_transverse_frame_maps_conormal_to_e1():
    u = np.array([1.0, 0.3]) / np.hypot(1.0, 0.3)
    L, s, i = transverse_frame(u, 1)
    w = np.linalg.inv(L).T @ u
    assert np.allclose(w / np.linalg.norm(w), [1, 0])


def test_approximate_primitive_routes_by_angle():
    v = VectorField([bump(2)])
    tang = approximate_primitive(PrimitiveSection(v, [0.05, 1.0], 1), 1, 0.2, 0.02,
                                 measure=False)
    assert tang.path == "tangent"
    trans = approximate_primitive(PrimitiveSection(v, [1.0, 0.3], 1), 1, 0.2, 0.02,
                                  measure=False)
    assert trans.path == "transverse"


def test_default_schedule_widens_tangent_stages():
    assert default_schedule(["tangent", "transverse"], 0.1, 0.01) == [(0.1, 0.2), (0.1, 0.01)]
    assert default_schedule(["tangent"], 0.1, 0.01) == [(0.1, 0.01)]


def test_top_order_difference_of_squares():
    b = bump(2)
    sigma = TopOrderSection(2, 2, {(0, 0): VectorField([b]), (1, 1): VectorField([-1 * b])})
    res = approximate_top_order(sigma, 1, eps=0.1, delta=0.01, per_delta=4, per_eps=8, other=9,
                                per_axis=21)
    assert res.checks["boundary_vanishing"] and res.checks["stages_ok"]
    assert sorted(res.params["paths"]) == ["tangent", "transverse"]
    assert res.measurements["lower_jet_sup"] < 1.0


def test_top_order_dimension_limit():
    sigma = TopOrderSection(3, 1, {(0,): [1]})
    with pytest.raises(ValueError, match="desk scale"):
        approximate_top_order(sigma, 1)


def test_reduce_order_k0():
    sigma = PolynomialSection(2, 1, {(0,): VectorField([bump(2)])})
    res = reduce_order(sigma, 0, 0.1, 0.02, per_delta=4, per_eps=8, other=9, per_axis=21)
    assert res.checks["boundary_vanishing"]
    assert isinstance(res.stages, list)


def test_stage_error_is_raised_for_incompatible_motions():
    assert issubclass(StageError, RuntimeError)
