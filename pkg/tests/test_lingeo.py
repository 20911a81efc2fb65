"""Subspaces, angles and the cube-face split."""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from jetlab.lingeo import (CubeComplex, HyperplaneField, Subspace, VariationError,
                           angle_to_skeleton, classify_faces, face_hyperplane_angle,
                           hyperplane_angle, subspace_angle)
from jetlab.polyjet.expression import Expr, VectorField, coords, sin


def test_angle_examples():
    x_axis = Subspace.coordinate(2, [0])
    diag = Subspace.span([1, 1])
    assert subspace_angle(x_axis, diag) == pytest.approx(np.pi / 4)
    assert subspace_angle(x_axis, Subspace.coordinate(2, [1])) == pytest.approx(np.pi / 2)
    plane = Subspace.coordinate(3, [0, 1])
    assert subspace_angle(Subspace.span([1, 1, 0]), plane) == pytest.approx(0, abs=1e-12)
    assert plane.contains(Subspace.span([3, -1, 0]))
    with pytest.raises(ValueError, match="swap"):
        subspace_angle(plane, x_axis.__class__.coordinate(3, [2]))


def test_hyperplane_from_normal():
    H = Subspace.hyperplane([0, 0, 2])
    assert H.dim == 2
    assert np.allclose(H.projector(), np.diag([1, 1, 0]))
    with pytest.raises(ValueError):
        Subspace.hyperplane([0, 0])


@given(st.floats(-np.pi / 2, np.pi / 2))
def test_face_angle_matches_principal_angle(t):
    u = np.array([np.sin(t), np.cos(t), 0.0])
    a = face_hyperplane_angle([0], u)[0]
    b = subspace_angle(Subspace.coordinate(3, [0]), Subspace.hyperplane(u))
    assert a == pytest.approx(b, abs=1e-7)
    assert hyperplane_angle(u, [0, 1, 0]) == pytest.approx(abs(t), abs=1e-7)


def test_cube_complex_counts():
    # 2N+1 ticks per axis: vertices, edges and squares of a 2N x 2N grid
    K = CubeComplex(2, 2, 3)
    dims = [f.dim for f in K.faces]
    assert dims.count(0) == 25 and dims.count(1) == 40 and dims.count(2) == 16
    assert len(K.cubes()) == 16
    assert all(f.anchor[2] == 0 for f in K.faces)
    with pytest.raises(ValueError):
        CubeComplex(3, 1, 2)


def test_classify_faces_constant_field():
    # tau = e_1^perp: edges along x1 are transverse, edges along x2 tangent
    K = CubeComplex(2, 2, 3)
    part = classify_faces(K, HyperplaneField([1.0, 0, 0]), lam=0.2)
    tangent_axes = {f.axes for f in part.almost_tangent}
    assert (1,) in tangent_axes and () in tangent_axes
    assert (0,) not in tangent_axes and (0, 1) not in tangent_axes
    assert {f.axes for f in part.transverse} == {(0,), (0, 1)}
    assert not part.borderline


def test_classify_faces_tilted_field_and_variation_error():
    x = coords(3)
    tau = HyperplaneField(VectorField([0.05 * sin(x[0]), Expr.const(0), Expr.const(1)]))
    part = classify_faces(CubeComplex(2, 2, 3), tau, lam=0.2)
    assert not part.transverse
    wild = HyperplaneField(VectorField([sin(8 * x[0]), Expr.const(0), Expr.const(0.1)]))
    with pytest.raises(VariationError, match="increase N"):
        classify_faces(CubeComplex(1, 1, 3), wild, lam=0.2)


def test_angle_to_skeleton():
    assert angle_to_skeleton(HyperplaneField([0, 0, 1.0]), 2) == pytest.approx(0)
    u = [np.sin(0.3), 0, np.cos(0.3)]
    assert angle_to_skeleton(HyperplaneField(u), 2) == pytest.approx(0.3)
    with pytest.raises(ValueError, match="vanishes"):
        HyperplaneField(VectorField([coords(2)[0], Expr.const(0)])).at([[0.0, 0.5]])
