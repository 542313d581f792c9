"""Piecewise-linear finite-element spaces on chart parameter domains.

Each element is a simplex in the parameter space of one chart; nodal hat
functions are affine in those parameters.  Geometry at quadrature points is
evaluated from the analytic charts, so the discrete manifold is the exact
immersed one (up to the polygonal boundary of disk-like domains).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import UnsupportedDimension
from .geometry import (
    ICOSAHEDRON_FACES,
    CurvaturePackage,
    ParametricGeometry,
    SampleSet,
    SurfacePoint,
    WeightData,
    concat_points,
    curvature_package,
    evaluate_chart,
    weight_data,
)

# reference rules on the unit simplex; weights sum to the simplex volume
_RULES = {
    (1, 2): (np.array([[0.5 - 0.5 / math.sqrt(3.0)], [0.5 + 0.5 / math.sqrt(3.0)]]), np.array([0.5, 0.5])),
    (1, 4): (
        np.array([[0.5 - 0.5 * math.sqrt(0.6)], [0.5], [0.5 + 0.5 * math.sqrt(0.6)]]),
        np.array([5.0, 8.0, 5.0]) / 18.0,
    ),
    (2, 2): (np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]]), np.full(3, 1 / 6)),
}
_a, _b = 0.445948490915965, 0.091576213509771
_wa, _wb = 0.223381589678011 / 2, 0.109951743655322 / 2
_RULES[(2, 4)] = (
    np.array([[_a, _a], [1 - 2 * _a, _a], [_a, 1 - 2 * _a], [_b, _b], [1 - 2 * _b, _b], [_b, 1 - 2 * _b]]),
    np.array([_wa, _wa, _wa, _wb, _wb, _wb]),
)


def quadrature_rule(n: int, degree: int = 2):
    """Points and weights on the reference n-simplex, exact to the given degree."""
    try:
        pts, w = _RULES[(n, degree)]
    except KeyError:
        raise UnsupportedDimension(f"no degree-{degree} rule for dimension {n}") from None
    return pts.copy(), w.copy()


def reference_basis(xi: np.ndarray):
    """Values (Q, n+1) and constant gradients (n+1, n) of the barycentric hat functions."""
    n = xi.shape[1]
    vals = np.concatenate([1.0 - xi.sum(axis=1, keepdims=True), xi], axis=1)
    grads = np.concatenate([-np.ones((1, n)), np.eye(n)], axis=0)
    return vals, grads


@dataclass
class Mesh:
    chart_names: list
    node_chart: np.ndarray
    node_param: np.ndarray
    elements: np.ndarray
    element_chart: np.ndarray
    element_params: np.ndarray
    boundary: np.ndarray
    periodic: tuple = ()


@dataclass
class DiscreteSpace:
    """P1 space with cached analytic geometry at quadrature points.

    Quadrature arrays are flattened element-major: entry ``e * Q + q`` is
    quadrature point ``q`` of element ``e``.  ``quad_weights`` already include
    the reference weight, the parameter Jacobian, sqrt(det g) and e^{-f}.
    """

    geometry: ParametricGeometry
    r: int
    resolution: int
    mesh: Mesh
    node_x: np.ndarray
    quad_ref: np.ndarray
    quad_ref_weights: np.ndarray
    basis_values: np.ndarray
    basis_grad: np.ndarray
    quad_weights: np.ndarray
    points: SurfacePoint
    curvature: CurvaturePackage
    weights: WeightData
    boundary_nodes: np.ndarray
    _node_points: Optional[SurfacePoint] = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return self.node_x.shape[0]

    @property
    def n_elements(self) -> int:
        return self.mesh.elements.shape[0]

    @property
    def n_quad(self) -> int:
        return self.quad_ref.shape[0]

    @property
    def elements(self) -> np.ndarray:
        return self.mesh.elements

    @property
    def free_nodes(self) -> np.ndarray:
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.boundary_nodes] = False
        return np.flatnonzero(mask)

    @property
    def periodic(self) -> tuple:
        return self.mesh.periodic

    def node_points(self) -> SurfacePoint:
        if self._node_points is None:
            self._node_points = _evaluate_grouped(
                self.geometry, self.mesh.chart_names, self.mesh.node_chart, self.mesh.node_param
            )
        return self._node_points

    def interpolate_at_quad(self, nodal: np.ndarray) -> np.ndarray:
        """Values at quadrature points of the P1 interpolant of nodal data."""
        vals = np.asarray(nodal)[self.elements]  # (ne, nv)
        return np.einsum("qv,ev->eq", self.basis_values, vals).reshape(-1)

    def gradient_at_quad(self, nodal: np.ndarray) -> np.ndarray:
        """Chart-coordinate gradients (ne*Q, n) of the P1 interpolant."""
        vals = np.asarray(nodal)[self.elements]
        g = np.einsum("evi,ev->ei", self.basis_grad, vals)
        return np.repeat(g, self.n_quad, axis=0)

    def samples(self, refine_check: bool = True) -> SampleSet:
        """Quadrature and boundary samples for extrema and weighted integrals."""
        bpts = bcurv = None
        if len(self.boundary_nodes):
            bpts = self.node_points().take(self.boundary_nodes)
            bcurv = curvature_package(self.geometry, bpts, self.r)
        epts = ecurv = None
        if refine_check:
            # element centroids and vertices double the sampling density
            cent = self.mesh.element_params.mean(axis=1)
            epts = concat_points([
                _evaluate_grouped(self.geometry, self.mesh.chart_names, self.mesh.element_chart, cent),
                self.node_points(),
            ])
            ecurv = curvature_package(self.geometry, epts, self.r)
        return SampleSet(self.points, self.curvature, self.quad_weights, bpts, bcurv, epts, ecurv)

    def dump(self, path) -> None:
        """Plain-text node/element listing, one record per line."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# kind={self.geometry.kind} n={self.geometry.n} N={self.geometry.N} "
                     f"nodes={self.n_nodes} elements={self.n_elements}\n")
            bset = set(self.boundary_nodes.tolist())
            for a, x in enumerate(self.node_x):
                coords = " ".join(format(v, ".17g") for v in x)
                fh.write(f"node {a} {coords} {'boundary' if a in bset else 'interior'}\n")
            for e, el in enumerate(self.elements):
                fh.write(f"element {e} {' '.join(str(int(v)) for v in el)}\n")


def _evaluate_grouped(geometry, chart_names, chart_idx, params) -> SurfacePoint:
    """Evaluate points that live in different charts, preserving input order."""
    chart_idx = np.asarray(chart_idx)
    order = []
    parts = []
    for c, name in enumerate(chart_names):
        sel = np.flatnonzero(chart_idx == c)
        if len(sel) == 0:
            continue
        parts.append(evaluate_chart(geometry, params[sel], chart=name))
        order.append(sel)
    pts = concat_points(parts)
    inv = np.empty(len(chart_idx), dtype=int)
    inv[np.concatenate(order)] = np.arange(len(chart_idx))
    return pts.take(inv)


# ---------------------------------------------------------------------------
# mesh builders


def _grid_mesh(chart, bounds, counts, periodic, boundary_axes) -> Mesh:
    """Structured grid on a box; periodic axes wrap at the index level."""
    n = len(bounds)
    if n == 1:
        (a, b), (m,) = bounds[0], counts
        per = periodic[0]
        nn = m if per else m + 1
        params = a + (b - a) * np.arange(nn)[:, None] / m
        elems, eparams = [], []
        for i in range(m):
            j = (i + 1) % nn
            elems.append((i, j))
            eparams.append([[a + (b - a) * i / m], [a + (b - a) * (i + 1) / m]])
        bnd = [] if per or not boundary_axes[0] else [0, m]
        return Mesh([chart], np.zeros(nn, dtype=int), params, np.array(elems), np.zeros(m, dtype=int),
                    np.array(eparams, dtype=float), np.array(bnd, dtype=int), (per,))
    (a0, b0), (a1, b1) = bounds
    m0, m1 = counts
    n0 = m0 if periodic[0] else m0 + 1
    n1 = m1 if periodic[1] else m1 + 1

    def nid(i, j):
        return (i % n0) * n1 + (j % n1)

    def par(i, j):
        return (a0 + (b0 - a0) * i / m0, a1 + (b1 - a1) * j / m1)

    params = np.array([par(i, j) for i in range(n0) for j in range(n1)], dtype=float)
    elems, eparams = [], []
    for i in range(m0):
        for j in range(m1):
            for tri in (((i, j), (i + 1, j), (i + 1, j + 1)), ((i, j), (i + 1, j + 1), (i, j + 1))):
                elems.append([nid(*v) for v in tri])
                eparams.append([par(*v) for v in tri])
    bnd = set()
    for i in range(n0):
        for j in range(n1):
            if (boundary_axes[0] and not periodic[0] and i in (0, m0)) or (
                boundary_axes[1] and not periodic[1] and j in (0, m1)
            ):
                bnd.add(nid(i, j))
    ne = len(elems)
    return Mesh([chart], np.zeros(len(params), dtype=int), params, np.array(elems), np.zeros(ne, dtype=int),
                np.array(eparams, dtype=float), np.array(sorted(bnd), dtype=int), tuple(periodic))


def _ring_mesh(chart, radii) -> Mesh:
    """Disk triangulation with 6j nodes on ring j (polar-structured)."""
    params = [(0.0, 0.0)]
    rings = [[0]]
    for j, rho in enumerate(radii, start=1):
        ids = []
        for k in range(6 * j):
            t = 2.0 * math.pi * k / (6 * j)
            ids.append(len(params))
            params.append((rho * math.cos(t), rho * math.sin(t)))
        rings.append(ids)
    elems = []
    for j in range(1, len(rings)):
        inner, outer = rings[j - 1], rings[j]
        if j == 1:
            for q in range(6):
                elems.append((0, outer[q], outer[(q + 1) % 6]))
            continue
        ni, no = len(inner), len(outer)
        p = q = 0
        while p < ni or q < no:
            if q < no and (p >= ni or (q + 1) / no <= (p + 1) / ni):
                elems.append((inner[p % ni], outer[q], outer[(q + 1) % no]))
                q += 1
            else:
                elems.append((inner[p], outer[q % no], inner[(p + 1) % ni]))
                p += 1
    params = np.array(params, dtype=float)
    elems = np.array(elems, dtype=int)
    return Mesh([chart], np.zeros(len(params), dtype=int), params, elems, np.zeros(len(elems), dtype=int),
                params[elems], np.array(rings[-1], dtype=int), ())


def _icosphere_mesh(freq: int) -> Mesh:
    """Frequency-``freq`` subdivision of each icosahedron face in its facet chart."""
    key_to_node = {}
    node_chart, node_param = [], []
    elems, echart, eparams = [], [], []
    for f, verts in enumerate(ICOSAHEDRON_FACES):
        local = {}
        for i in range(freq + 1):
            for j in range(freq + 1 - i):
                bary = {verts[0]: freq - i - j}
                bary[verts[1]] = bary.get(verts[1], 0) + i
                bary[verts[2]] = bary.get(verts[2], 0) + j
                key = tuple(sorted((v, w) for v, w in bary.items() if w))
                if key not in key_to_node:
                    key_to_node[key] = len(node_param)
                    node_chart.append(f)
                    node_param.append((i / freq, j / freq))
                local[(i, j)] = key_to_node[key]
        for i in range(freq):
            for j in range(freq - i):
                tris = [((i, j), (i + 1, j), (i, j + 1))]
                if i + j < freq - 1:
                    tris.append(((i + 1, j), (i + 1, j + 1), (i, j + 1)))
                for tri in tris:
                    elems.append([local[v] for v in tri])
                    echart.append(f)
                    eparams.append([(a / freq, b / freq) for a, b in tri])
    names = [f"facet:{f}" for f in range(len(ICOSAHEDRON_FACES))]
    return Mesh(names, np.array(node_chart), np.array(node_param, dtype=float), np.array(elems, dtype=int),
                np.array(echart), np.array(eparams, dtype=float), np.array([], dtype=int), ())


def _build_mesh(geometry: ParametricGeometry, res: int) -> Mesh:
    kind, p = geometry.kind, geometry.params
    if kind == "circle" or (kind == "sphere" and geometry.n == 1):
        return _grid_mesh("angle", [(0.0, 2.0 * math.pi)], (res,), (True,), (False,))
    if kind == "sphere":
        return _icosphere_mesh(res)
    if kind == "cylinder-segment":
        R, L = p["radius"], p["length"]
        nt = max(2, int(round(res * L / (2.0 * math.pi * R))))
        return _grid_mesh("product", [(0.0, 2.0 * math.pi), (-L / 2, L / 2)], (res, nt), (True, False), (False, True))
    if kind == "spherical-cap":
        R, th = p["radius"], p["cap_angle"]
        radii = [R * math.sin(th * j / res) for j in range(1, res + 1)]
        return _ring_mesh("north", radii)
    if kind == "flat-domain":
        dom = p["domain"]
        if dom == "interval":
            return _grid_mesh("flat", [p["bounds"]], (res,), (False,), (True,))
        if dom == "disk":
            rho = p["radius"]
            return _ring_mesh("flat", [rho * j / res for j in range(1, res + 1)])
        if dom == "rectangle":
            return _grid_mesh("flat", list(p["bounds"]), (res, res), (False, False), (True, True))
    if kind == "custom":
        per = p.get("periodic", ())
        bounds = [p["bounds"]] if p["domain"] == "interval" else list(p["bounds"])
        nd = len(bounds)
        periodic = tuple(ax in per for ax in range(nd))
        bnd_axes = tuple(geometry.has_boundary and not periodic[ax] for ax in range(nd))
        return _grid_mesh("custom", bounds, (res,) * nd, periodic, bnd_axes)
    raise UnsupportedDimension(f"no mesh builder for kind {kind!r}")


def build_space(geometry: ParametricGeometry, resolution: int, r: int = 0, quadrature_degree: int = 2) -> DiscreteSpace:
    """Build the P1 space, quadrature and cached geometry for ``geometry``.

    ``resolution`` counts elements per period (circle, interval), grid cells
    per side, rings (disk, cap) or icosahedral edge subdivisions (sphere).
    """
    if geometry.n > 2:
        raise UnsupportedDimension(f"finite elements support n <= 2 (got n={geometry.n}); use the analytic oracle")
    if resolution < 4:
        raise ValueError("resolution must be at least 4")
    mesh = _build_mesh(geometry, int(resolution))
    n = geometry.n
    xi, wref = quadrature_rule(n, quadrature_degree)
    phi, gref = reference_basis(xi)
    P = mesh.element_params  # (ne, n+1, n)
    B = np.swapaxes(P[:, 1:, :] - P[:, :1, :], 1, 2)  # (ne, n, n): columns are edge vectors
    detB = np.abs(np.linalg.det(B))
    basis_grad = np.einsum("vk,eki->evi", gref, np.linalg.inv(B))
    quad_u = P[:, :1, :] + np.einsum("eik,qk->eqi", B, xi)  # (ne, Q, n)
    ne, Q = quad_u.shape[:2]
    echart = np.repeat(mesh.element_chart, Q)
    points = _evaluate_grouped(geometry, mesh.chart_names, echart, quad_u.reshape(-1, n))
    curv = curvature_package(geometry, points, r)
    wdata = weight_data(geometry, points)
    w = (np.repeat(detB, Q) * np.tile(wref, ne)) * points.area_factor * np.exp(-wdata.f)
    node_pts = _evaluate_grouped(geometry, mesh.chart_names, mesh.node_chart, mesh.node_param)
    return DiscreteSpace(
        geometry, r, int(resolution), mesh, node_pts.x, xi, wref, phi, basis_grad, w,
        points, curv, wdata, np.asarray(mesh.boundary, dtype=int), node_pts,
    )


# ---------------------------------------------------------------------------
# trial functions


@dataclass
class TrialFunction:
    """Function sampled on a space: nodal values, quadrature values and chart gradients."""

    label: str
    nodal: np.ndarray
    quad: np.ndarray
    quad_grad: np.ndarray
    exact: bool = False

    def scaled(self, s: float) -> "TrialFunction":
        return TrialFunction(f"{s:g}*{self.label}", s * self.nodal, s * self.quad, s * self.quad_grad, self.exact)


def coordinate_functions(space: DiscreteSpace) -> list:
    """Ambient coordinates x_A with exact tangential gradients E_A^T (chart components)."""
    pts = space.points
    out = []
    for A in range(space.geometry.N):
        out.append(TrialFunction(f"x_{A + 1}", space.node_x[:, A].copy(), pts.x[:, A].copy(),
                                 pts.tangents[:, A, :].copy(), exact=True))
    return out


def linear_combination(funcs, coeffs, label: Optional[str] = None) -> TrialFunction:
    coeffs = np.asarray(coeffs, dtype=float)
    nodal = sum(c * f.nodal for c, f in zip(coeffs, funcs))
    quad = sum(c * f.quad for c, f in zip(coeffs, funcs))
    grad = sum(c * f.quad_grad for c, f in zip(coeffs, funcs))
    if label is None:
        label = " + ".join(f"{c:.6g}*{f.label}" for c, f in zip(coeffs, funcs))
    return TrialFunction(label, nodal, quad, grad, all(f.exact for f in funcs))


def constant_function(space: DiscreteSpace, value: float = 1.0) -> TrialFunction:
    return TrialFunction(f"const({value:g})", np.full(space.n_nodes, float(value)),
                         np.full(space.points.x.shape[0], float(value)),
                         np.zeros((space.points.x.shape[0], space.geometry.n)), exact=True)


def nodal_function(space: DiscreteSpace, values, label: str = "h") -> TrialFunction:
    """P1 interpolant of nodal data as a trial function."""
    values = np.asarray(values, dtype=float)
    return TrialFunction(label, values.copy(), space.interpolate_at_quad(values), space.gradient_at_quad(values))


def gradient_norm2(space: DiscreteSpace, trial: TrialFunction) -> np.ndarray:
    """|grad h|^2 = d_i h g^{ij} d_j h at every quadrature point."""
    return np.einsum("mi,mij,mj->m", trial.quad_grad, space.points.metric_inv, trial.quad_grad)
