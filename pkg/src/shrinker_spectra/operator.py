"""Weighted weak form of the divergence operator e^f div(e^{-f} T grad .).

The operator is never discretized in strong form: stiffness
K_ab = sum_q w_q <grad phi_a, T grad phi_b> and mass M_ab = sum_q w_q phi_a phi_b
already carry the measure e^{-f} dv, so the discrete operator -M^{-1} K is
self-adjoint in the weighted inner product by construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .discretization import DiscreteSpace, TrialFunction
from .errors import EmptyBoundary, NotPositiveDefinite, SingularMass

TensorSpec = Union[str, np.ndarray, Callable]


@dataclass
class WeightedOperatorPair:
    """Stiffness/mass pair restricted to the free nodes.

    ``K_full`` and ``M_full`` keep all nodes so that nodal data with boundary
    values can still be pushed through the operator.
    """

    K: sp.csr_matrix
    M: sp.csr_matrix
    K_full: sp.csr_matrix
    M_full: sp.csr_matrix
    free: np.ndarray
    bc: str
    tensor: str
    weight: str
    space: DiscreteSpace = field(repr=False)
    tensor_contravariant: Optional[np.ndarray] = field(default=None, repr=False)
    _lu: Optional[object] = field(default=None, repr=False)
    _K_identity: Optional[sp.csr_matrix] = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.K.shape[0]

    def mass_solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve M y = rhs on the free nodes (columns solved independently)."""
        if self._lu is None:
            try:
                self._lu = splu(self.M.tocsc())
            except RuntimeError as exc:
                raise SingularMass(f"mass matrix factorization failed: {exc}") from exc
        y = self._lu.solve(np.asarray(rhs, dtype=float))
        if not np.all(np.isfinite(y)):
            raise SingularMass("mass solve produced non-finite values")
        return y

    def to_full(self, v: np.ndarray) -> np.ndarray:
        """Extend free-node vectors (or column stacks) by zero boundary values."""
        v = np.asarray(v)
        out = np.zeros((self.space.n_nodes,) + v.shape[1:])
        out[self.free] = v
        return out

    def dump(self, path, which: str = "K") -> None:
        """Write the free-node matrix as ``row col value`` lines."""
        A = (self.K if which == "K" else self.M).tocoo()
        order = np.lexsort((A.col, A.row))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# {which} {A.shape[0]} {A.shape[1]} nnz={A.nnz}\n")
            for i, j, v in zip(A.row[order], A.col[order], A.data[order]):
                fh.write(f"{i} {j} {format(v, '.17g')}\n")


def tensor_field(space: DiscreteSpace, tensor: TensorSpec = "newton"):
    """Orthonormal-frame tensor (m, n, n) and its label for every quadrature point.

    ``tensor`` is ``"newton"`` (T^r of the space), ``"identity"``, a constant
    symmetric n x n matrix, or a callable taking the batched SurfacePoint and
    returning (m, n, n) frame components.
    """
    n = space.geometry.n
    m = space.points.x.shape[0]
    if isinstance(tensor, str):
        if tensor == "newton":
            return space.curvature.newton, f"newton(r={space.r})"
        if tensor == "identity":
            return np.broadcast_to(np.eye(n), (m, n, n)).copy(), "identity"
        raise ValueError(f"unknown tensor descriptor {tensor!r}")
    if callable(tensor):
        T = np.asarray(tensor(space.points), dtype=float)
        label = getattr(tensor, "__name__", "callable")
    else:
        T = np.asarray(tensor, dtype=float)
        label = "constant" + np.array2string(T.reshape(-1), separator=",", precision=6)
    if T.shape == (n, n):
        T = np.broadcast_to(T, (m, n, n)).copy()
    if T.shape != (m, n, n):
        raise ValueError(f"tensor field has shape {T.shape}, expected {(m, n, n)}")
    if not np.allclose(T, np.swapaxes(T, 1, 2), rtol=1e-12, atol=1e-12):
        raise ValueError("tensor field is not symmetric")
    return 0.5 * (T + np.swapaxes(T, 1, 2)), label


def _contravariant(space: DiscreteSpace, T_frame: np.ndarray) -> np.ndarray:
    F = space.points.frame
    return np.einsum("mik,mkl,mjl->mij", F, T_frame, F)


def _assemble(space: DiscreteSpace, Tc: np.ndarray):
    ne, Q = space.n_elements, space.n_quad
    n = space.geometry.n
    nv = n + 1
    w = space.quad_weights.reshape(ne, Q)
    Tw = np.einsum("eq,eqij->eij", w, Tc.reshape(ne, Q, n, n))
    G = space.basis_grad
    Kloc = np.einsum("eai,eij,ebj->eab", G, Tw, G)
    Mloc = np.einsum("eq,qa,qb->eab", w, space.basis_values, space.basis_values)
    el = space.elements
    rows = np.repeat(el, nv, axis=1).reshape(-1)
    cols = np.tile(el, (1, nv)).reshape(-1)
    shape = (space.n_nodes, space.n_nodes)
    K = sp.coo_matrix((Kloc.reshape(-1), (rows, cols)), shape=shape).tocsr()
    M = sp.coo_matrix((Mloc.reshape(-1), (rows, cols)), shape=shape).tocsr()
    return ((K + K.T) * 0.5).tocsr(), ((M + M.T) * 0.5).tocsr()


def assemble_pair(space: DiscreteSpace, tensor: TensorSpec = "newton", bc: str = "closed") -> WeightedOperatorPair:
    """Assemble the weighted stiffness/mass pair; Dirichlet eliminates boundary rows and columns.

    The weight is the one attached to ``space.geometry``.
    """
    T, label = tensor_field(space, tensor)
    lam_min = float(np.linalg.eigvalsh(T).min())
    if not lam_min > 0:
        raise NotPositiveDefinite(f"tensor {label} has eigenvalue {lam_min:.3e} at a quadrature point")
    if bc not in ("closed", "dirichlet"):
        raise ValueError(f"bc must be 'closed' or 'dirichlet', got {bc!r}")
    if bc == "dirichlet" and len(space.boundary_nodes) == 0:
        raise EmptyBoundary(f"{space.geometry.kind} has no boundary; Dirichlet problem is undefined")
    Tc = _contravariant(space, T)
    K, M = _assemble(space, Tc)
    free = space.free_nodes if bc == "dirichlet" else np.arange(space.n_nodes)
    Kf = K[free][:, free].tocsr()
    Mf = M[free][:, free].tocsr()
    return WeightedOperatorPair(Kf, Mf, K, M, free, bc, label, space.geometry.weight.mode, space, Tc)


def identity_companion(pair: WeightedOperatorPair) -> sp.csr_matrix:
    """Free-node stiffness with T = identity and the same weight (drifting Laplacian)."""
    return assemble_pair(pair.space, "identity", pair.bc).K


def weighted_mass(space: DiscreteSpace, values: np.ndarray, free: Optional[np.ndarray] = None) -> sp.csr_matrix:
    """Matrix sum_q w_q h(q) phi_a phi_b of multiplication by h, restricted to ``free``."""
    ne, Q = space.n_elements, space.n_quad
    nv = space.geometry.n + 1
    wh = (space.quad_weights * np.asarray(values)).reshape(ne, Q)
    loc = np.einsum("eq,qa,qb->eab", wh, space.basis_values, space.basis_values)
    el = space.elements
    rows = np.repeat(el, nv, axis=1).reshape(-1)
    cols = np.tile(el, (1, nv)).reshape(-1)
    H = sp.coo_matrix((loc.reshape(-1), (rows, cols)), shape=(space.n_nodes,) * 2).tocsr()
    H = ((H + H.T) * 0.5).tocsr()
    if free is not None:
        H = H[free][:, free].tocsr()
    return H


def weak_image(space: DiscreteSpace, pair: WeightedOperatorPair, trial: TrialFunction) -> np.ndarray:
    """Load vector -sum_q w_q <grad u, T grad phi_a> using the sampled (exact) gradient of ``trial``."""
    ne, Q, n = space.n_elements, space.n_quad, space.geometry.n
    flux = np.einsum("mi,mij->mj", trial.quad_grad, pair.tensor_contravariant) * space.quad_weights[:, None]
    loc = np.einsum("eqj,eaj->ea", flux.reshape(ne, Q, n), space.basis_grad)
    full = np.bincount(space.elements.reshape(-1), loc.reshape(-1), minlength=space.n_nodes)
    return -full[pair.free]


def apply_operator(space: DiscreteSpace, pair: WeightedOperatorPair, u) -> np.ndarray:
    """Galerkin image of the operator on the free nodes: solves M y = -(weak form of u).

    ``u`` is either nodal data (its P1 interpolant is used, i.e. y = -M^{-1} K u)
    or a TrialFunction, whose sampled gradients enter the weak form directly.
    The second form is the L2(dmu) projection of the operator applied to the
    smooth function and converges at second order on unstructured meshes,
    where the first is only consistent pointwise on symmetric patches.
    """
    if isinstance(u, TrialFunction):
        return pair.mass_solve(weak_image(space, pair, u))
    u = np.asarray(u, dtype=float)
    if u.shape[0] != space.n_nodes:
        raise ValueError(f"expected {space.n_nodes} nodal values, got {u.shape[0]}")
    rhs = -(pair.K_full[pair.free] @ u)
    return pair.mass_solve(rhs)
