"""The wiggle isotopy F_t and the cutoff phi built from its time-one map.

F_t(x) = (x_1, ..., x_{m-1}, x_m + phi_t(x)) with

    phi_t(x) = t * a * eps * sin(pi x_1 / (2 delta))
               * prod_{i<m} T((1 - |x_i|) / eps)
               * chi(x_m)
               * prod_j T((1 - |z_j|) / eps)

where T is the 1/2..3/4 transition profile and chi = 1 - T_chi is a wide
plateau in the last coordinate (1 on |x_m| <= eps, 0 for |x_m| >= 1 - eps/2).
The wide plateau keeps |d phi / d x_m| below 1/2, which certifies that every
F_t is injective.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels
from ..polyjet.jet import Jet
from ..polyjet.ops import jet_inverse
from ..polyjet.truncpoly import TruncatedPoly
from ..profiles import TRANSITION, Profile, smoothstep_coeffs

DEFAULT_AMPLITUDE = 0.5
INJECTIVITY_MARGIN = 0.5


class InjectivityError(ValueError):
    def __init__(self, measured_min: float, certified_min: float):
        super().__init__(
            f"wiggle is not certifiably injective: min(1 + d phi/d x_m) measured "
            f"{measured_min:.4g}, certified {certified_min:.4g}")
        self.measured_min = measured_min
        self.certified_min = certified_min


def admissible_delta(delta: float) -> tuple[float, int]:
    """Largest 1/(2J+1) <= delta, so the rectangles tile [-1, 1] in x_1."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    J = math.ceil((1.0 / delta - 1.0) / 2.0 - 1e-12)
    return 1.0 / (2 * J + 1), J


def _edge_poly(p: TruncatedPoly, eps: float) -> TruncatedPoly:
    """Jet of T((1 - |x_i|)/eps) given the jet p of x_i.

    |x_i| is smooth wherever the factor is not constant (|x_i| close to 1),
    so the sign of the constant term picks the branch.
    """
    sgn = np.where(p.const >= 0, 1.0, -1.0)
    arg = (1.0 - p.scale(sgn)) / eps
    return arg.compose_univariate(TRANSITION.derivatives(arg.const, p.r))


def _profile_poly(prof: Profile, p: TruncatedPoly) -> TruncatedPoly:
    return p.compose_univariate(prof.derivatives(p.const, p.r))


def _sin_poly(p: TruncatedPoly) -> TruncatedPoly:
    c = p.const
    return p.compose_univariate([np.sin(c + k * np.pi / 2) for k in range(p.r + 1)])


@dataclass(frozen=True)
class WiggleIsotopy:
    m: int
    eps: float
    delta: float
    amplitude: float = DEFAULT_AMPLITUDE
    q: int = 0
    requested_delta: float | None = None
    J: int = 0
    certificate: dict = field(default_factory=dict, compare=False)

    # ------------------------------------------------------------ pieces
    @property
    def chi(self) -> Profile:
        return Profile("transition", self.eps, 1.0 - self.eps / 2)

    def chi_slope(self) -> float:
        return self.chi.sup_norms(1)[1]

    def certified_min(self) -> float:
        """Lower bound for 1 + d phi_t / d x_m over all x and t in [0, 1]."""
        return 1.0 - self.amplitude * self.eps * self.chi_slope()

    def zfactor(self, z=None) -> float:
        if self.q == 0:
            return 1.0
        if z is None:
            raise ValueError("parametric isotopy needs a parameter value z")
        z = np.atleast_1d(np.asarray(z, dtype=np.float64))
        if len(z) != self.q:
            raise ValueError(f"expected {self.q} parameters, got {len(z)}")
        return float(np.prod(TRANSITION((1.0 - np.abs(z)) / self.eps)))

    def phi_poly(self, X: list[TruncatedPoly], t: float = 1.0, z=None) -> TruncatedPoly:
        """phi_t evaluated on coordinate jets X."""
        amp = t * self.amplitude * self.eps * self.zfactor(z)
        out = _sin_poly(X[0] * (np.pi / (2.0 * self.delta)))
        for i in range(self.m - 1):
            out = out * _edge_poly(X[i], self.eps)
        out = out * (1.0 - _profile_poly(self.chi, X[-1]))
        return out * amp

    # -------------------------------------------------------- evaluation
    def map_polys(self, X: list[TruncatedPoly], t: float = 1.0, z=None) -> list[TruncatedPoly]:
        return list(X[:-1]) + [X[-1] + self.phi_poly(X, t, z)]

    @property
    def motion(self) -> np.ndarray:
        """Direction in which F_t moves points."""
        return np.eye(self.m)[-1]

    def jet(self, points, r: int, t: float = 1.0, z=None) -> Jet:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return Jet(pts, self.map_polys(TruncatedPoly.identity(pts, r), t, z))

    def __call__(self, points, t: float = 1.0, z=None) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        X = TruncatedPoly.identity(pts, 0)
        out = pts.copy()
        out[:, -1] += self.phi_poly(X, t, z).const
        return out

    def inverse(self, points, t: float = 1.0, z=None, use_numba=None) -> np.ndarray:
        """F_t^{-1}: only the last coordinate moves, found by bisection."""
        x = np.atleast_2d(np.asarray(points, dtype=np.float64))
        chi = self.chi
        ym = _kernels.solve_last_coordinate(
            x, t * self.amplitude * self.eps, self.eps, self.delta, self.zfactor(z),
            np.array(smoothstep_coeffs(), dtype=np.float64), chi.inner, chi.outer,
            use_numba=use_numba)
        y = x.copy()
        y[:, -1] = ym
        return y

    def inverse_jet(self, points, r: int, t: float = 1.0, z=None) -> Jet:
        y = self.inverse(points, t, z)
        return jet_inverse(self.jet(y, r, t, z))

    def to_json(self) -> dict:
        return {"m": self.m, "eps": self.eps, "delta": self.delta,
                "requested_delta": self.requested_delta, "J": self.J,
                "amplitude": self.amplitude, "q": self.q, "certificate": self.certificate}


def injectivity_grid(W: WiggleIsotopy, per_delta: int = 8, other: int = 33,
                     cap: int = 4001) -> np.ndarray:
    n1 = min(int(2.0 / W.delta * per_delta) + 1, cap)
    axes = [np.linspace(-1, 1, n1)] + [np.linspace(-1, 1, other)] * (W.m - 1)
    return np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)


def measured_injectivity(W: WiggleIsotopy, points, z=None) -> float:
    """min over samples of 1 + d phi_1 / d x_m (t = 1 is the extreme case)."""
    Jt = W.jet(points, 1, 1.0, z)
    e = [0] * W.m
    e[-1] = 1
    return float(np.min(Jt.components[-1].derivative_value(tuple(e))))


def build_wiggle_isotopy(m: int, eps: float, delta: float, amplitude: float | None = None,
                         q: int = 0, check_points=None, z_samples=None) -> WiggleIsotopy:
    """Construct F_t, rounding delta down to the tiling lattice and certifying injectivity."""
    if m < 2:
        raise ValueError("the wiggle needs m >= 2")
    if not 0 < eps < 0.5:
        raise ValueError(f"eps must lie in (0, 1/2), got {eps}")
    d, J = admissible_delta(delta)
    if d >= eps:
        raise ValueError(f"need delta << eps, got delta={d:.4g}, eps={eps}")
    probe = WiggleIsotopy(m, eps, d, 1.0, q, delta, J)
    slope = probe.chi_slope()
    if amplitude is None:
        # largest a <= 1/2 with a * eps * max|chi'| < 1/2
        amplitude = min(DEFAULT_AMPLITUDE, 0.999 * INJECTIVITY_MARGIN / (eps * slope))
    W = WiggleIsotopy(m, eps, d, float(amplitude), q, delta, J)
    cert = W.certified_min()
    pts = injectivity_grid(W) if check_points is None else check_points
    zs = [None] if q == 0 else (z_samples if z_samples is not None else [np.zeros(q)])
    meas = min(measured_injectivity(W, pts, z) for z in zs)
    if cert <= 0 or meas <= 0:
        raise InjectivityError(meas, cert)
    W.certificate.update({"certified_min": cert, "measured_min": meas,
                          "certified_injective": bool(cert > 0),
                          "amplitude_rule": bool(cert > 1 - INJECTIVITY_MARGIN)})
    return W


# ------------------------------------------------------------------ cutoff

def cutoff_phi_poly(W: WiggleIsotopy, points, r: int, z=None):
    """(jet of phi at points, y = F_1^{-1}(points)).

    phi(x) = 1 - T(4 y_m / eps) with F_1(y) = x.  Only samples with
    |y_m| < 3 eps / 16 need the full inverse jet; elsewhere phi vanishes to
    all orders.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    y = W.inverse(pts, 1.0, z)
    out = TruncatedPoly.zeros(W.m, r, len(pts))
    live = np.abs(y[:, -1]) < 3.0 * W.eps / 16.0
    if np.any(live) and r == 0:
        out.coeffs[0, live] = 1.0 - TRANSITION(4.0 * y[live, -1] / W.eps)
    elif np.any(live):
        inv = jet_inverse(W.jet(y[live], r, 1.0, z))
        ym = inv.components[-1]
        phi = 1.0 - _profile_poly(TRANSITION, ym * (4.0 / W.eps))
        out.coeffs[:, live] = phi.coeffs
    return out, y


def cutoff_phi(W: WiggleIsotopy, x, z=None) -> np.ndarray:
    """Values of phi at points x."""
    p, _ = cutoff_phi_poly(W, x, 0, z)
    return p.const


# ------------------------------------------------------- derived isotopies

def linear_polys(L: np.ndarray, X: list[TruncatedPoly]) -> list[TruncatedPoly]:
    out = []
    for row in L:
        acc = X[0] * float(row[0])
        for j in range(1, len(X)):
            if row[j] != 0:
                acc = acc + X[j] * float(row[j])
        out.append(acc)
    return out


class ConjugatedIsotopy:
    """L^{-1} o W_t o L for an invertible linear L."""

    def __init__(self, W, L: np.ndarray):
        self.W, self.L = W, np.asarray(L, dtype=np.float64)
        self.Linv = np.linalg.inv(self.L)
        self.m = self.L.shape[0]

    @property
    def motion(self) -> np.ndarray:
        d = self.Linv @ self.W.motion
        return d / np.linalg.norm(d)

    def map_polys(self, X, t: float = 1.0, z=None):
        return linear_polys(self.Linv, self.W.map_polys(linear_polys(self.L, X), t, z))

    def __call__(self, points, t: float = 1.0, z=None) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return self.W(pts @ self.L.T, t, z) @ self.Linv.T

    def inverse(self, points, t: float = 1.0, z=None) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return self.W.inverse(pts @ self.L.T, t, z) @ self.Linv.T

    def jet(self, points, r: int, t: float = 1.0, z=None) -> Jet:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return Jet(pts, self.map_polys(TruncatedPoly.identity(pts, r), t, z))

    def inverse_jet(self, points, r: int, t: float = 1.0, z=None) -> Jet:
        return jet_inverse(self.jet(self.inverse(points, t, z), r, t, z))

    def to_json(self) -> dict:
        return {"kind": "conjugated", "frame": self.L.tolist(), "wiggle": self.W.to_json()}


class ComposedIsotopy:
    """F_t = outer_t o inner_t."""

    def __init__(self, outer, inner):
        self.outer, self.inner = outer, inner
        self.m = inner.m

    @property
    def motions(self) -> list[np.ndarray]:
        out = []
        for part in (self.outer, self.inner):
            if hasattr(part, "motions"):
                out.extend(part.motions)
            elif hasattr(part, "motion"):
                out.append(part.motion)
        return out

    def map_polys(self, X, t: float = 1.0, z=None):
        return self.outer.map_polys(self.inner.map_polys(X, t, z), t, z)

    def __call__(self, points, t: float = 1.0, z=None):
        return self.outer(self.inner(points, t, z), t, z)

    def inverse(self, points, t: float = 1.0, z=None):
        return self.inner.inverse(self.outer.inverse(points, t, z), t, z)

    def jet(self, points, r: int, t: float = 1.0, z=None) -> Jet:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return Jet(pts, self.map_polys(TruncatedPoly.identity(pts, r), t, z))

    def inverse_jet(self, points, r: int, t: float = 1.0, z=None) -> Jet:
        return jet_inverse(self.jet(self.inverse(points, t, z), r, t, z))

    def to_json(self) -> dict:
        return {"kind": "composed", "outer": self.outer.to_json(), "inner": self.inner.to_json()}
