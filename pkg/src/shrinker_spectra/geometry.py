"""Analytic geometry of immersed manifolds: charts, curvature, Newton tensors.

Every chart returns exact first and second derivatives, so curvature
quantities never depend on mesh differencing.  All evaluators are
vectorized over a leading batch axis of parameter points.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    DegenerateMetric,
    DimensionMismatch,
    NotPositiveDefinite,
    OddOrderRequested,
)

FLAT_KINDS = ("flat-domain",)
CLOSED_KINDS = ("sphere", "circle")


# ---------------------------------------------------------------------------
# charts


class Chart:
    """A smooth map from parameter space R^n into R^N with exact derivatives.

    Subclasses implement :meth:`jet`, returning the position ``x`` of shape
    ``(m, N)``, the Jacobian ``dx`` of shape ``(m, N, n)`` and the second
    derivatives ``ddx`` of shape ``(m, N, n, n)`` for ``m`` parameter points.
    """

    n: int
    N: int

    def jet(self, u: np.ndarray):
        raise NotImplementedError


class FlatChart(Chart):
    def __init__(self, n: int):
        self.n = self.N = n

    def jet(self, u):
        m = u.shape[0]
        dx = np.broadcast_to(np.eye(self.n), (m, self.n, self.n)).copy()
        return u.copy(), dx, np.zeros((m, self.n, self.n, self.n))


class CircleChart(Chart):
    """Arc-angle chart theta -> R (cos theta, sin theta)."""

    def __init__(self, radius: float):
        self.radius = radius
        self.n, self.N = 1, 2

    def jet(self, u):
        t = u[:, 0]
        c, s = np.cos(t), np.sin(t)
        R = self.radius
        x = R * np.stack([c, s], axis=-1)
        dx = R * np.stack([-s, c], axis=-1)[:, :, None]
        ddx = -x[:, :, None, None]
        return x, dx, ddx


class CylinderChart(Chart):
    """(theta, t) -> (R cos theta, R sin theta, t)."""

    def __init__(self, radius: float):
        self.radius = radius
        self.n, self.N = 2, 3

    def jet(self, u):
        th, t = u[:, 0], u[:, 1]
        c, s = np.cos(th), np.sin(th)
        R = self.radius
        m = u.shape[0]
        x = np.stack([R * c, R * s, t], axis=-1)
        dx = np.zeros((m, 3, 2))
        dx[:, 0, 0], dx[:, 1, 0] = -R * s, R * c
        dx[:, 2, 1] = 1.0
        ddx = np.zeros((m, 3, 2, 2))
        ddx[:, 0, 0, 0], ddx[:, 1, 0, 0] = -R * c, -R * s
        return x, dx, ddx


class GraphSphereChart(Chart):
    """Graph chart u -> (u, sign * sqrt(R^2 - |u|^2)) of S^n(R), valid for |u| < R."""

    def __init__(self, n: int, radius: float, sign: float = 1.0):
        self.n, self.N = n, n + 1
        self.radius = radius
        self.sign = sign

    def jet(self, u):
        m, n = u.shape
        R2 = self.radius**2
        rho2 = np.einsum("mi,mi->m", u, u)
        if np.any(rho2 >= R2):
            raise DegenerateMetric("graph chart evaluated outside |u| < R")
        phi = np.sqrt(R2 - rho2)
        sg = self.sign
        x = np.concatenate([u, sg * phi[:, None]], axis=1)
        dx = np.zeros((m, n + 1, n))
        dx[:, :n, :] = np.eye(n)
        dx[:, n, :] = -sg * u / phi[:, None]
        ddx = np.zeros((m, n + 1, n, n))
        ddx[:, n] = -sg * (
            np.eye(n)[None] / phi[:, None, None]
            + np.einsum("mi,mj->mij", u, u) / phi[:, None, None] ** 3
        )
        return x, dx, ddx


class SphericalCoordinatesChart(Chart):
    """Polar/azimuth chart (theta, phi) of S^2(R); singular at the poles."""

    def __init__(self, radius: float):
        self.radius = radius
        self.n, self.N = 2, 3

    def jet(self, u):
        th, ph = u[:, 0], u[:, 1]
        st, ct, sp, cp = np.sin(th), np.cos(th), np.sin(ph), np.cos(ph)
        R = self.radius
        m = u.shape[0]
        x = R * np.stack([st * cp, st * sp, ct], axis=-1)
        dx = np.empty((m, 3, 2))
        dx[:, :, 0] = R * np.stack([ct * cp, ct * sp, -st], axis=-1)
        dx[:, :, 1] = R * np.stack([-st * sp, st * cp, np.zeros(m)], axis=-1)
        ddx = np.empty((m, 3, 2, 2))
        ddx[:, :, 0, 0] = -x
        ddx[:, :, 0, 1] = ddx[:, :, 1, 0] = R * np.stack(
            [-ct * sp, ct * cp, np.zeros(m)], axis=-1
        )
        ddx[:, :, 1, 1] = R * np.stack([-st * cp, -st * sp, np.zeros(m)], axis=-1)
        return x, dx, ddx


class RadialFacetChart(Chart):
    """Radial projection of an affine patch p(u) = origin + edges @ u onto S^n(R)."""

    def __init__(self, radius: float, origin, edges):
        self.radius = radius
        self.origin = np.asarray(origin, dtype=float)
        self.edges = np.asarray(edges, dtype=float)
        self.N, self.n = self.edges.shape

    def jet(self, u):
        p = self.origin[None, :] + u @ self.edges.T
        return radial_projection_jet(p, self.edges, self.radius)


def radial_projection_jet(p, dp, radius):
    """Jet of x = R p / |p| for an affine p with constant derivative ``dp`` (N, n)."""
    rho = np.linalg.norm(p, axis=1)
    x = radius * p / rho[:, None]
    pd = p @ dp  # (m, n): <p, dp_i>
    r3 = rho[:, None, None] ** 3
    dx = radius * (dp[None] / rho[:, None, None] - p[:, :, None] * pd[:, None, :] / r3)
    dd = dp.T @ dp  # (n, n)
    r5 = rho[:, None, None, None] ** 5
    ddx = radius * (
        -np.einsum("ai,mj->maij", dp, pd) / r3[..., None]
        - np.einsum("aj,mi->maij", dp, pd) / r3[..., None]
        - p[:, :, None, None] * dd[None, None] / r3[..., None]
        + 3.0 * np.einsum("ma,mi,mj->maij", p, pd, pd) / r5
    )
    return x, dx, ddx


class CallableChart(Chart):
    """Chart built from user callables ``position``, ``jacobian`` and ``hessian``.

    Each callable receives an ``(m, n)`` array of parameter points.
    """

    def __init__(self, n: int, N: int, position: Callable, jacobian: Callable, hessian: Callable):
        self.n, self.N = n, N
        self._position, self._jacobian, self._hessian = position, jacobian, hessian

    def jet(self, u):
        return (
            np.asarray(self._position(u), dtype=float),
            np.asarray(self._jacobian(u), dtype=float),
            np.asarray(self._hessian(u), dtype=float),
        )


# ---------------------------------------------------------------------------
# weights


@dataclass(frozen=True)
class Weight:
    """Density exponent f of the measure e^{-f} dv.

    ``mode`` is ``"gaussian"`` (f = |x|^2/2), ``"zero"`` (f = 0) or
    ``"custom"``, in which case ``value`` and ``gradient`` map ambient points
    ``(m, N)`` to f values ``(m,)`` and ambient gradients ``(m, N)``.
    """

    mode: str = "gaussian"
    value: Optional[Callable] = None
    gradient: Optional[Callable] = None

    def f(self, x):
        if self.mode == "gaussian":
            return 0.5 * np.einsum("ma,ma->m", x, x)
        if self.mode == "zero":
            return np.zeros(x.shape[0])
        return np.asarray(self.value(x), dtype=float)

    def ambient_gradient(self, x):
        if self.mode == "gaussian":
            return x.copy()
        if self.mode == "zero":
            return np.zeros_like(x)
        return np.asarray(self.gradient(x), dtype=float)


GAUSSIAN = Weight("gaussian")
UNWEIGHTED = Weight("zero")


def as_weight(spec) -> Weight:
    if isinstance(spec, Weight):
        return spec
    if spec in ("gaussian", None):
        return GAUSSIAN
    if spec in ("zero", "none"):
        return UNWEIGHTED
    raise ValueError(f"unknown weight {spec!r}")


# ---------------------------------------------------------------------------
# geometry container


@dataclass
class ParametricGeometry:
    """Immersed manifold described by an atlas of analytic charts.

    ``params`` keeps the kind-specific construction data (radius, cap angle,
    domain bounds) used by the mesh builders.
    """

    kind: str
    n: int
    N: int
    charts: dict
    default_chart: str
    has_boundary: bool
    weight: Weight = GAUSSIAN
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise DimensionMismatch("intrinsic dimension must be positive")
        min_N = self.n if self.kind in FLAT_KINDS else self.n + 1
        if self.N < min_N:
            raise DimensionMismatch(f"ambient dimension {self.N} too small for n={self.n}")
        if self.kind in CLOSED_KINDS and self.has_boundary:
            raise ValueError(f"{self.kind} geometries are closed")
        if self.kind in ("cylinder-segment", "spherical-cap", "flat-domain") and not self.has_boundary:
            raise ValueError(f"{self.kind} geometries carry a boundary")
        for name, chart in self.charts.items():
            if chart.n != self.n or chart.N != self.N:
                raise DimensionMismatch(f"chart {name!r} has dimensions ({chart.n}, {chart.N})")

    @property
    def codimension(self) -> int:
        return self.N - self.n


ICOSAHEDRON_FACES = (
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
)


def icosahedron_vertices(radius: float = 1.0) -> np.ndarray:
    t = (1.0 + math.sqrt(5.0)) / 2.0
    v = np.array(
        [
            (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
            (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
            (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
        ],
        dtype=float,
    )
    return radius * v / np.linalg.norm(v[0])


def shrinker_radius(k: int, factor: float = 1.0) -> float:
    """Radius factor * sqrt(k) of the round k-sphere factor of a self-shrinker."""
    return factor * math.sqrt(k)


def sphere(n: int = 2, radius: Optional[float] = None, weight=GAUSSIAN) -> ParametricGeometry:
    """Round sphere S^n(R) in R^{n+1}; R defaults to the shrinker radius sqrt(n)."""
    R = shrinker_radius(n) if radius is None else float(radius)
    charts = {
        "north": GraphSphereChart(n, R, 1.0),
        "south": GraphSphereChart(n, R, -1.0),
    }
    if n == 2:
        charts["spherical"] = SphericalCoordinatesChart(R)
        V = icosahedron_vertices(R)
        for f, (a, b, c) in enumerate(ICOSAHEDRON_FACES):
            charts[f"facet:{f}"] = RadialFacetChart(R, V[a], np.stack([V[b] - V[a], V[c] - V[a]], axis=1))
    if n == 1:
        charts["angle"] = CircleChart(R)
    return ParametricGeometry(
        "sphere", n, n + 1, charts, "north", False, as_weight(weight), {"radius": R}
    )


def circle(radius: float = 1.0, weight=GAUSSIAN) -> ParametricGeometry:
    """Circle S^1(R) in R^2; R = 1 is the one-dimensional self-shrinker."""
    return ParametricGeometry(
        "circle", 1, 2, {"angle": CircleChart(radius)}, "angle", False,
        as_weight(weight), {"radius": float(radius)},
    )


def cylinder_segment(length: float = 2.0, radius: float = 1.0, weight=GAUSSIAN) -> ParametricGeometry:
    """S^1(R) x [-length/2, length/2] in R^3."""
    return ParametricGeometry(
        "cylinder-segment", 2, 3, {"product": CylinderChart(radius)}, "product", True,
        as_weight(weight), {"radius": float(radius), "length": float(length)},
    )


def spherical_cap(polar_angle: float, n: int = 2, radius: Optional[float] = None, weight=GAUSSIAN) -> ParametricGeometry:
    """Geodesic ball of polar angle < pi/2 about the north pole of S^n(R)."""
    if not 0.0 < polar_angle < math.pi / 2:
        raise ValueError("cap polar angle must lie in (0, pi/2) for the graph chart")
    R = shrinker_radius(n) if radius is None else float(radius)
    return ParametricGeometry(
        "spherical-cap", n, n + 1, {"north": GraphSphereChart(n, R, 1.0)}, "north", True,
        as_weight(weight), {"radius": R, "cap_angle": float(polar_angle)},
    )


def flat_interval(a: float = 0.0, b: float = math.pi, weight=UNWEIGHTED) -> ParametricGeometry:
    return ParametricGeometry(
        "flat-domain", 1, 1, {"flat": FlatChart(1)}, "flat", True,
        as_weight(weight), {"domain": "interval", "bounds": (float(a), float(b))},
    )


def flat_disk(radius: float = 1.0, weight=UNWEIGHTED) -> ParametricGeometry:
    return ParametricGeometry(
        "flat-domain", 2, 2, {"flat": FlatChart(2)}, "flat", True,
        as_weight(weight), {"domain": "disk", "radius": float(radius)},
    )


def flat_rectangle(bounds=((0.0, 1.0), (0.0, 1.0)), weight=UNWEIGHTED) -> ParametricGeometry:
    (a0, b0), (a1, b1) = bounds
    return ParametricGeometry(
        "flat-domain", 2, 2, {"flat": FlatChart(2)}, "flat", True,
        as_weight(weight), {"domain": "rectangle", "bounds": ((a0, b0), (a1, b1))},
    )


def custom_geometry(chart: Chart, domain: str, bounds, has_boundary: bool = True,
                    weight=GAUSSIAN, periodic=()) -> ParametricGeometry:
    """Wrap a user chart over an interval or rectangle parameter domain.

    ``periodic`` lists parameter axes identified at the domain ends.
    """
    if domain not in ("interval", "rectangle"):
        raise ValueError("custom domains are 'interval' or 'rectangle'")
    return ParametricGeometry(
        "custom", chart.n, chart.N, {"custom": chart}, "custom", has_boundary,
        as_weight(weight), {"domain": domain, "bounds": bounds, "periodic": tuple(periodic)},
    )


# ---------------------------------------------------------------------------
# pointwise evaluation


@dataclass
class SurfacePoint:
    """Immersion data at one or many parameter points.

    Arrays carry a leading batch axis when ``batched`` is true.  ``frame``
    holds the coefficients of an orthonormal tangent frame in the chart basis,
    so ``tangents @ frame`` is orthonormal; ``second`` holds the chart second
    derivatives.
    """

    u: np.ndarray
    x: np.ndarray
    tangents: np.ndarray
    metric: np.ndarray
    metric_inv: np.ndarray
    area_factor: np.ndarray
    frame: np.ndarray
    normals: np.ndarray
    second: np.ndarray
    chart: str = ""
    batched: bool = True

    def batch(self) -> "SurfacePoint":
        if self.batched:
            return self
        return SurfacePoint(
            *(np.asarray(getattr(self, k))[None] for k in _POINT_ARRAYS), chart=self.chart, batched=True
        )

    def take(self, idx) -> "SurfacePoint":
        return SurfacePoint(*(getattr(self, k)[idx] for k in _POINT_ARRAYS), chart=self.chart, batched=True)

    def __len__(self):
        return self.x.shape[0] if self.batched else 1


_POINT_ARRAYS = ("u", "x", "tangents", "metric", "metric_inv", "area_factor", "frame", "normals", "second")


def concat_points(points) -> SurfacePoint:
    points = [p.batch() for p in points]
    return SurfacePoint(
        *(np.concatenate([getattr(p, k) for p in points], axis=0) for k in _POINT_ARRAYS),
        chart="mixed", batched=True,
    )


def evaluate_chart(geometry: ParametricGeometry, u, chart: Optional[str] = None) -> SurfacePoint:
    """Evaluate position, metric and frames of ``geometry`` at parameter point(s) ``u``."""
    name = chart or geometry.default_chart
    ch = geometry.charts[name]
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    ub = u.reshape(-1, geometry.n)
    x, dx, ddx = ch.jet(ub)
    g = np.einsum("mai,maj->mij", dx, dx)
    det = np.linalg.det(g)
    scale = (np.trace(g, axis1=1, axis2=2) / geometry.n) ** geometry.n
    bad = ~(det > 1e-13 * scale)
    if np.any(bad):
        raise DegenerateMetric(f"metric degenerate at u={ub[np.argmax(bad)].tolist()} in chart {name!r}")
    ginv = np.linalg.inv(g)
    ginv = 0.5 * (ginv + np.swapaxes(ginv, 1, 2))
    L = np.linalg.cholesky(g)
    frame = np.swapaxes(np.linalg.inv(L), 1, 2)
    normals = _normal_frame(geometry, dx, ddx)
    pt = SurfacePoint(ub, x, dx, g, ginv, np.sqrt(det), frame, normals, ddx, chart=name, batched=True)
    if single:
        return SurfacePoint(*(getattr(pt, k)[0] for k in _POINT_ARRAYS), chart=name, batched=False)
    return pt


def _normal_frame(geometry, dx, ddx):
    m, N, n = dx.shape
    if N == n:
        return np.zeros((m, N, 0))
    Q, _ = np.linalg.qr(dx, mode="complete")
    nu = Q[:, :, n:]
    if N == n + 1:
        # orient the unit normal along the mean curvature vector
        h = np.einsum("maij,ma->mij", ddx, nu[:, :, 0])
        ginv = np.linalg.inv(np.einsum("mai,maj->mij", dx, dx))
        tr = np.einsum("mij,mij->m", ginv, h)
        flip = tr < 0
        nu[flip] *= -1.0
    return nu


# ---------------------------------------------------------------------------
# curvature


@dataclass
class CurvaturePackage:
    """Second fundamental form, symmetric functions and Newton tensor of order r.

    Tensors are expressed in the orthonormal tangent frame of the evaluated
    point, except ``newton_contravariant`` which is the chart-basis matrix
    T^{ij} entering <grad u, T grad v> = du_i T^{ij} dv_j.
    ``symmetric_functions[..., s]`` is S_s (NaN for odd s in codimension > 1).
    """

    r: int
    second_fundamental_form: np.ndarray
    mean_curvature_vector: np.ndarray
    principal_curvatures: Optional[np.ndarray]
    symmetric_functions: np.ndarray
    newton: np.ndarray
    newton_recursion: Optional[np.ndarray]
    newton_kronecker: np.ndarray
    newton_contravariant: np.ndarray
    min_eigenvalue: np.ndarray
    batched: bool = True

    @property
    def S_r(self):
        return self.symmetric_functions[..., self.r]

    @property
    def H_r(self):
        n = self.newton.shape[-1]
        return self.S_r / math.comb(n, self.r)

    @property
    def positive_definite(self):
        return self.min_eigenvalue > 0

    def take(self, idx) -> "CurvaturePackage":
        return CurvaturePackage(
            self.r, *(None if getattr(self, k) is None else getattr(self, k)[idx] for k in _CURV_ARRAYS)
        )


_CURV_ARRAYS = (
    "second_fundamental_form", "mean_curvature_vector", "principal_curvatures",
    "symmetric_functions", "newton", "newton_recursion", "newton_kronecker",
    "newton_contravariant", "min_eigenvalue",
)


def concat_curvature(packages) -> CurvaturePackage:
    first = packages[0]
    vals = []
    for k in _CURV_ARRAYS:
        if getattr(first, k) is None:
            vals.append(None)
        else:
            vals.append(np.concatenate([getattr(p, k) for p in packages], axis=0))
    return CurvaturePackage(first.r, *vals)


def _check_order(n: int, r: int):
    if r % 2:
        raise OddOrderRequested(f"r={r}: Newton operators are defined here for some even integer r only")
    if r < 0 or r >= n:
        raise DimensionMismatch(f"order r={r} must satisfy 0 <= r <= n-1 = {n - 1}")


def _perm_sign(perm) -> int:
    inv = sum(1 for i in range(len(perm)) for j in range(i + 1, len(perm)) if perm[i] > perm[j])
    return -1 if inv % 2 else 1


_LETTERS = "abcdefghijklmnop"


def kronecker_newton(Q: np.ndarray, r: int) -> np.ndarray:
    """Newton tensor from the generalized Kronecker sum over r+1 indices.

    ``Q[m, i, j, k, l] = <A_ij, A_kl>`` in an orthonormal frame.  The
    generalized Kronecker symbol is expanded as a signed sum over
    permutations of the r+1 lower indices.
    """
    m, n = Q.shape[0], Q.shape[1]
    T = np.zeros((m, n, n))
    L = _LETTERS[: r + 1]
    for perm in itertools.permutations(range(r + 1)):
        sgn = _perm_sign(perm)
        factors = [f"z{L[2 * q]}{L[perm[2 * q]]}{L[2 * q + 1]}{L[perm[2 * q + 1]]}" for q in range(r // 2)]
        if perm[r] == r:
            if factors:
                s = np.einsum(",".join(factors) + "->z", *([Q] * len(factors)), optimize=True)
            else:
                s = np.ones(m)
            T += sgn * s[:, None, None] * np.eye(n)[None]
        else:
            out = f"z{L[r]}{L[perm[r]]}"
            T += sgn * np.einsum(",".join(factors) + "->" + out, *([Q] * len(factors)), optimize=True)
    return T / math.factorial(r)


def kronecker_symmetric_function(Q: np.ndarray, r: int) -> np.ndarray:
    """S_r for even r from the generalized Kronecker contraction of r copies of A."""
    m = Q.shape[0]
    if r == 0:
        return np.ones(m)
    L = _LETTERS[:r]
    total = np.zeros(m)
    for perm in itertools.permutations(range(r)):
        factors = [f"z{L[2 * q]}{L[perm[2 * q]]}{L[2 * q + 1]}{L[perm[2 * q + 1]]}" for q in range(r // 2)]
        total += _perm_sign(perm) * np.einsum(",".join(factors) + "->z", *([Q] * len(factors)), optimize=True)
    return total / math.factorial(r)


def elementary_symmetric(kappa: np.ndarray) -> np.ndarray:
    """Coefficients S_0..S_n of det(tI - A) = sum (-1)^s S_s t^{n-s} from eigenvalues ``kappa`` (m, n)."""
    m, n = kappa.shape
    e = np.zeros((m, n + 1))
    e[:, 0] = 1.0
    for i in range(n):
        e[:, 1 : i + 2] = e[:, 1 : i + 2] + kappa[:, i : i + 1] * e[:, 0 : i + 1]
    return e


def newton_recursion(A: np.ndarray, S: np.ndarray, r: int) -> np.ndarray:
    """T^0 = I, T^s = S_s I - T^{s-1} A for a symmetric shape operator ``A`` (m, n, n)."""
    m, n, _ = A.shape
    I = np.broadcast_to(np.eye(n), (m, n, n))
    T = I.copy()
    for s in range(1, r + 1):
        T = S[:, s, None, None] * I - T @ A
        T = 0.5 * (T + np.swapaxes(T, 1, 2))
    return T


def curvature_package(geometry: ParametricGeometry, point: SurfacePoint, r: int) -> CurvaturePackage:
    """Second fundamental form, S_r, Newton tensor T^r and its positivity margin."""
    n = geometry.n
    _check_order(n, r)
    pt = point.batch()
    m = pt.x.shape[0]
    F = pt.frame
    # h^alpha in the orthonormal tangent frame
    h_chart = np.einsum("maij,mak->mkij", pt.second, pt.normals)
    h = np.einsum("mip,mkij,mjq->mkpq", F, h_chart, F)
    h = 0.5 * (h + np.swapaxes(h, 2, 3))
    traces = np.einsum("mkii->mk", h)
    H = np.einsum("mk,mak->ma", traces, pt.normals) / n
    Q = np.einsum("mkij,mkpq->mijpq", h, h)
    T_kron = kronecker_newton(Q, r)
    codim = geometry.N - n
    if codim <= 1:
        A = h[:, 0] if codim == 1 else np.zeros((m, n, n))
        kappa = np.linalg.eigvalsh(A)
        S = elementary_symmetric(kappa)
        T_rec = newton_recursion(A, S, r)
        T = T_rec
    else:
        kappa = None
        S = np.full((m, n + 1), np.nan)
        for s in range(0, n + 1, 2):
            S[:, s] = kronecker_symmetric_function(Q, s)
        T_rec = None
        T = T_kron
    T = 0.5 * (T + np.swapaxes(T, 1, 2))
    T_contra = np.einsum("mip,mpq,mjq->mij", F, T, F)
    T_contra = 0.5 * (T_contra + np.swapaxes(T_contra, 1, 2))
    lam_min = np.linalg.eigvalsh(T)[:, 0]
    pkg = CurvaturePackage(r, h, H, kappa, S, T, T_rec, T_kron, T_contra, lam_min)
    if not point.batched:
        return CurvaturePackage(
            r, *(None if getattr(pkg, k) is None else getattr(pkg, k)[0] for k in _CURV_ARRAYS), batched=False
        )
    return pkg


def shrinker_residual(geometry: ParametricGeometry, point: SurfacePoint):
    """|n H + x^perp|; vanishes exactly where the self-shrinker equation holds."""
    pt = point.batch()
    h_chart = np.einsum("maij,mak->mkij", pt.second, pt.normals)
    traces = np.einsum("mij,mkij->mk", pt.metric_inv, h_chart)
    nH = np.einsum("mk,mak->ma", traces, pt.normals)
    x_perp = np.einsum("mak,mk->ma", pt.normals, np.einsum("ma,mak->mk", pt.x, pt.normals))
    res = np.linalg.norm(nH + x_perp, axis=1)
    return res if point.batched else float(res[0])


@dataclass
class WeightData:
    """Weight f, its chart-basis gradient d_i f and |x|^2."""

    f: np.ndarray
    gradient: np.ndarray
    x_norm2: np.ndarray


def weight_data(geometry: ParametricGeometry, point: SurfacePoint) -> WeightData:
    pt = point.batch()
    f = geometry.weight.f(pt.x)
    grad = np.einsum("ma,mai->mi", geometry.weight.ambient_gradient(pt.x), pt.tangents)
    x2 = np.einsum("ma,ma->m", pt.x, pt.x)
    if not point.batched:
        return WeightData(f[0], grad[0], x2[0])
    return WeightData(f, grad, x2)


# ---------------------------------------------------------------------------
# sampled extrema and integrals


@dataclass
class SampleSet:
    """Quadrature points with their measure weights, plus boundary samples."""

    quad_points: SurfacePoint
    quad_curvature: CurvaturePackage
    quad_weights: np.ndarray
    boundary_points: Optional[SurfacePoint] = None
    boundary_curvature: Optional[CurvaturePackage] = None
    extra_points: Optional[SurfacePoint] = None
    extra_curvature: Optional[CurvaturePackage] = None


@dataclass
class AmbientStats:
    n: int
    N: int
    r: int
    xi: float
    min_x2: float
    max_S: float
    vol: float
    integral_S: float
    source: str = "quadrature"
    drift: dict = field(default_factory=dict)
    caveat: str = ""

    def as_dict(self):
        return {
            "n": self.n, "N": self.N, "r": self.r, "xi": self.xi, "min_x2": self.min_x2,
            "max_S": self.max_S, "vol": self.vol, "integral_S": self.integral_S,
            "source": self.source, "drift": dict(self.drift), "caveat": self.caveat,
        }


DISCRETE_EXTREMA_CAVEAT = (
    "extrema are minima/maxima over quadrature and boundary samples and may "
    "under-approximate the continuum values"
)


def ambient_stats(geometry: ParametricGeometry, samples: SampleSet, r: int) -> AmbientStats:
    """min |x|^2, max S_r, xi = min eig T^r, weighted volume and integral of S_r.

    Raises NotPositiveDefinite when T^r fails to be positive definite on a sample.
    """
    pts = [samples.quad_points]
    curv = [samples.quad_curvature]
    if samples.boundary_points is not None and len(samples.boundary_points):
        pts.append(samples.boundary_points)
        curv.append(samples.boundary_curvature)

    def extrema(points, packs):
        x2 = np.concatenate([np.einsum("ma,ma->m", p.x, p.x) for p in points])
        S = np.concatenate([c.S_r for c in packs])
        lam = np.concatenate([c.min_eigenvalue for c in packs])
        return float(x2.min()), float(S.max()), float(lam.min())

    min_x2, max_S, xi = extrema(pts, curv)
    if not xi > 0:
        raise NotPositiveDefinite(f"T^{r} is not positive definite on the samples (min eigenvalue {xi:.3e})")
    w = samples.quad_weights
    vol = float(np.sum(w))
    integral_S = float(np.sum(w * samples.quad_curvature.S_r))
    drift = {}
    if samples.extra_points is not None:
        e_min_x2, e_max_S, e_xi = extrema(pts + [samples.extra_points], curv + [samples.extra_curvature])
        drift = {"min_x2": e_min_x2 - min_x2, "max_S": e_max_S - max_S, "xi": e_xi - xi}
        min_x2, max_S, xi = e_min_x2, e_max_S, e_xi
    return AmbientStats(geometry.n, geometry.N, r, xi, min_x2, max_S, vol, integral_S,
                        drift=drift, caveat=DISCRETE_EXTREMA_CAVEAT)


def sphere_area(n: int, radius: float) -> float:
    return 2.0 * math.pi ** ((n + 1) / 2) / math.gamma((n + 1) / 2) * radius**n


def analytic_sphere_stats(n: int, r: int) -> AmbientStats:
    """Exact umbilic data of S^n(sqrt n) with the Gaussian weight."""
    _check_order(n, r)
    kappa = 1.0 / math.sqrt(n)
    S_r = math.comb(n, r) * kappa**r
    xi = math.comb(n - 1, r) * kappa**r
    vol = math.exp(-n / 2.0) * sphere_area(n, math.sqrt(n))
    return AmbientStats(n, n + 1, r, xi, float(n), S_r, vol, S_r * vol, source="analytic")
