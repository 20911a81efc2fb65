"""Linear subspaces, angles, hyperplane fields and cubical face classification."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .polyjet.expression import VectorField
from .polyjet.truncpoly import TruncatedPoly

ORTHO_TOL = 1e-12


class Subspace:
    """A linear subspace of R^m with an orthonormal basis stored as columns."""

    def __init__(self, basis: np.ndarray):
        Q = np.asarray(basis, dtype=np.float64)
        if Q.ndim != 2:
            raise ValueError("basis must be a matrix (m, dim)")
        if Q.shape[1] and np.max(np.abs(Q.T @ Q - np.eye(Q.shape[1]))) > ORTHO_TOL * 10:
            raise ValueError("basis columns are not orthonormal")
        self.Q = Q

    @classmethod
    def span(cls, vectors, tol: float = 1e-10) -> "Subspace":
        """Subspace spanned by the columns of ``vectors`` (m, k)."""
        A = np.asarray(vectors, dtype=np.float64)
        if A.ndim == 1:
            A = A[:, None]
        U, s, _ = np.linalg.svd(A, full_matrices=False)
        rank = int(np.sum(s > tol * max(1.0, s[0] if len(s) else 0.0)))
        return cls(U[:, :rank])

    @classmethod
    def hyperplane(cls, normal) -> "Subspace":
        u = np.asarray(normal, dtype=np.float64)
        nrm = np.linalg.norm(u)
        if nrm == 0:
            raise ValueError("hyperplane normal must be nonzero")
        u = u / nrm
        U, _, _ = np.linalg.svd(np.eye(len(u)) - np.outer(u, u))
        return cls(U[:, : len(u) - 1])

    @classmethod
    def coordinate(cls, m: int, axes) -> "Subspace":
        return cls(np.eye(m)[:, list(axes)])

    @property
    def m(self) -> int:
        return self.Q.shape[0]

    @property
    def dim(self) -> int:
        return self.Q.shape[1]

    def projector(self) -> np.ndarray:
        return self.Q @ self.Q.T

    def contains(self, other: "Subspace", tol: float = 1e-9) -> bool:
        return subspace_angle(other, self) <= tol

    def __repr__(self) -> str:
        return f"Subspace(m={self.m}, dim={self.dim})"


def subspace_angle(V: Subspace, W: Subspace) -> float:
    """Largest principal angle from V into W (radians); needs dim V <= dim W."""
    if V.m != W.m:
        raise ValueError(f"ambient dimensions differ: {V.m} vs {W.m}")
    if V.dim > W.dim:
        raise ValueError(f"dim V = {V.dim} exceeds dim W = {W.dim}; swap the arguments")
    if V.dim == 0:
        return 0.0
    # arcsin of the residual keeps small angles accurate where arccos of the
    # cosines would lose half the digits
    R = V.Q - W.Q @ (W.Q.T @ V.Q)
    s = np.linalg.svd(R, compute_uv=False)
    return float(np.arcsin(np.clip(np.max(s), 0.0, 1.0)))


def hyperplane_angle(u, w) -> np.ndarray:
    """Angle between hyperplanes u^perp and w^perp (rows of unit co-normals)."""
    c = np.abs(np.sum(np.asarray(u) * np.asarray(w), axis=-1))
    return np.arccos(np.clip(c, 0.0, 1.0))


def face_hyperplane_angle(axes, u: np.ndarray) -> np.ndarray:
    """Angle between a coordinate subspace span(e_axes) and u_x^perp, per row.

    For a coordinate subspace T and unit u, the largest principal angle from
    T into u^perp is arcsin |P_T u|.  If dim T = m the roles swap and the
    angle is 0.
    """
    u = np.atleast_2d(u)
    m = u.shape[1]
    axes = list(axes)
    if len(axes) == 0 or len(axes) >= m:
        return np.zeros(len(u))
    proj = np.linalg.norm(u[:, axes], axis=1)
    return np.arcsin(np.clip(proj, 0.0, 1.0))


class HyperplaneField:
    """tau_x = u_x^perp with u given by a constant vector or a vector field."""

    def __init__(self, conormal, m: int | None = None):
        if isinstance(conormal, VectorField):
            self.field = conormal
            self.constant = None
            self.m = m or conormal.n
            if conormal.n != self.m:
                raise ValueError("co-normal field must have m components")
        else:
            u = np.asarray(conormal, dtype=np.float64)
            if np.linalg.norm(u) == 0:
                raise ValueError("co-normal must be nonzero")
            self.field = None
            self.constant = u
            self.m = len(u)

    def raw(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if self.constant is not None:
            return np.broadcast_to(self.constant, (len(pts), self.m)).copy()
        return np.atleast_2d(self.field.evaluate(pts))

    def at(self, points) -> np.ndarray:
        """Unit co-normals, shape (B, m); rejects zero vectors."""
        u = self.raw(points)
        nrm = np.linalg.norm(u, axis=1)
        if np.any(nrm < 1e-14):
            bad = np.atleast_2d(points)[np.argmin(nrm)]
            raise ValueError(f"co-normal vanishes at {bad}")
        return u / nrm[:, None]

    def jets(self, xs: list[TruncatedPoly]) -> list[TruncatedPoly]:
        """Un-normalized co-normal components evaluated on polynomial inputs."""
        if self.constant is not None:
            p = xs[0]
            return [TruncatedPoly.constant(p.m, p.r, c, p.exact).broadcast(p.batch)
                    for c in self.constant]
        return self.field.jet(xs)

    def check_nonvanishing(self, grid) -> None:
        self.at(grid.points())

    def to_json(self):
        if self.constant is not None:
            return {"constant": [float(c) for c in self.constant]}
        return {"field": self.field.to_json()}


# --------------------------------------------------------- cube complexes

@dataclass(frozen=True)
class Face:
    dim: int
    anchor: tuple[float, ...]   # lower corner, length m
    axes: tuple[int, ...]       # coordinate directions spanned
    N: int

    @property
    def width(self) -> float:
        return 1.0 / self.N

    def sample(self, per_edge: int) -> np.ndarray:
        a = np.array(self.anchor)
        if self.dim == 0:
            return a[None, :]
        t = np.linspace(0.0, self.width, per_edge)
        mesh = np.meshgrid(*([t] * self.dim), indexing="ij")
        pts = np.repeat(a[None, :], mesh[0].size, axis=0)
        for g, ax in zip(mesh, self.axes):
            pts[:, ax] += g.ravel()
        return pts

    def to_json(self) -> dict:
        return {"dim": self.dim, "anchor": list(self.anchor), "axes": list(self.axes), "N": self.N}


class CubeComplex:
    """Faces of the subdivision of I^k x 0 into cubes of side 1/N (2N per axis)."""

    def __init__(self, k: int, N: int, m: int):
        if not 0 <= k <= m or N < 1:
            raise ValueError(f"need 0 <= k <= m and N >= 1, got k={k}, m={m}, N={N}")
        self.k, self.N, self.m = k, N, m
        faces = []
        ticks = np.linspace(-1.0, 1.0, 2 * N + 1)
        for j in range(k + 1):
            for axes in itertools.combinations(range(k), j):
                ranges = [range(2 * N) if i in axes else range(2 * N + 1) for i in range(k)]
                for idx in itertools.product(*ranges):
                    anchor = tuple(float(ticks[t]) for t in idx) + (0.0,) * (m - k)
                    faces.append(Face(j, anchor, axes, N))
        self.faces = faces

    def cubes(self) -> list[Face]:
        return [f for f in self.faces if f.dim == self.k]

    def __len__(self) -> int:
        return len(self.faces)


@dataclass
class FacePartition:
    almost_tangent: list[Face]
    transverse: list[Face]
    borderline: list[tuple[Face, float]] = field(default_factory=list)
    max_angle: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "almost_tangent": [f.to_json() for f in self.almost_tangent],
            "transverse": [f.to_json() for f in self.transverse],
            "borderline": [{"face": f.to_json(), "angle": a} for f, a in self.borderline],
        }


class VariationError(ValueError):
    """The hyperplane field turns too much within one cube of the subdivision."""

    def __init__(self, cube: Face, variation: float, limit: float):
        super().__init__(
            f"tau varies by {variation:.4g} rad on the cube at {cube.anchor} "
            f"(limit {limit:.4g}); increase N")
        self.cube, self.variation, self.limit = cube, variation, limit


def _cube_variation(tau: HyperplaneField, cube: Face, per_edge: int, pad: float) -> float:
    a = np.array(cube.anchor)
    m = len(a)
    lo, hi = a.copy(), a.copy()
    for ax in cube.axes:
        hi[ax] += cube.width
    lo[list(cube.axes)] -= pad * cube.width
    hi[list(cube.axes)] += pad * cube.width
    # thicken in the normal directions too, to cover Op(Q)
    others = [i for i in range(m) if i not in cube.axes]
    lo[others] -= pad * cube.width
    hi[others] += pad * cube.width
    lo, hi = np.clip(lo, -1, 1), np.clip(hi, -1, 1)
    axes = [np.linspace(l, h, per_edge if h > l else 1) for l, h in zip(lo, hi)]
    pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    u = tau.at(pts)
    gram = np.clip(np.abs(u @ u.T), 0.0, 1.0)
    return float(np.arccos(np.min(gram)))


def classify_faces(K: CubeComplex, tau: HyperplaneField, lam: float,
                   per_edge: int = 5, pad: float = 0.1) -> FacePartition:
    """Split faces into almost tangent (sampled angle <= lam) and transverse."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    for cube in K.cubes():
        var = _cube_variation(tau, cube, per_edge if K.k else 1, pad)
        if var >= lam / 2:
            raise VariationError(cube, var, lam / 2)
    tangent, transverse, border = [], [], []
    angles = {}
    for f in K.faces:
        pts = f.sample(per_edge)
        ang = face_hyperplane_angle(f.axes, tau.at(pts))
        amax, amin = float(np.max(ang)), float(np.min(ang))
        angles[f] = amax
        if amax <= lam:
            tangent.append(f)
        elif amin < lam / 2:
            border.append((f, amax))
            tangent.append(f)
        else:
            transverse.append(f)
    return FacePartition(tangent, transverse, border, angles)


def angle_to_skeleton(tau: HyperplaneField, k: int, samples: int = 21) -> float:
    """max over sampled x in I^k x 0 of the angle between R^k x 0 and tau_x."""
    m = tau.m
    if k == 0:
        return 0.0
    t = np.linspace(-1, 1, samples)
    mesh = np.meshgrid(*([t] * k), indexing="ij")
    pts = np.zeros((mesh[0].size, m))
    for i, g in enumerate(mesh):
        pts[:, i] = g.ravel()
    return float(np.max(face_hyperplane_angle(range(k), tau.at(pts))))
