"""Generalized eigenproblem K u = lambda M u, multiplicity clusters and the sphere oracle."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import InsufficientSpectrum, MassNotSPD
from .geometry import _check_order
from .operator import WeightedOperatorPair


@dataclass
class Spectrum:
    """Eigenvalues numbered from ``first_index`` (0 for closed, 1 for Dirichlet problems).

    ``vectors`` holds M-orthonormal eigenvectors over the free nodes as
    columns, or ``None`` for the analytic oracle.
    """

    values: np.ndarray
    vectors: Optional[np.ndarray]
    problem: str
    source: str
    discretization: str
    orthonormality_defect: float = 0.0
    pair: Optional[WeightedOperatorPair] = field(default=None, repr=False)

    @property
    def first_index(self) -> int:
        return 0 if self.problem == "closed" else 1

    @property
    def count(self) -> int:
        return len(self.values)

    @property
    def last_index(self) -> int:
        return self.first_index + self.count - 1

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.first_index, self.first_index + self.count)

    def lam(self, i: int) -> float:
        """Eigenvalue with the problem's own numbering (repeated by multiplicity)."""
        j = i - self.first_index
        if j < 0 or j >= self.count:
            raise InsufficientSpectrum(f"lambda_{i} requested but only lambda_{self.first_index}.."
                                       f"lambda_{self.last_index} are available")
        return float(self.values[j])

    def vector(self, i: int) -> np.ndarray:
        if self.vectors is None:
            from .errors import OracleSpectrum

            raise OracleSpectrum("analytic spectra carry no eigenfunctions")
        self.lam(i)
        return self.vectors[:, i - self.first_index]

    def require(self, last: int) -> None:
        if last > self.last_index:
            raise InsufficientSpectrum(f"need eigenvalues up to lambda_{last}, have up to lambda_{self.last_index}")


def fix_signs(U: np.ndarray) -> np.ndarray:
    """Flip columns so that each column's largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(U), axis=0)
    s = np.sign(U[idx, np.arange(U.shape[1])])
    s[s == 0] = 1.0
    return U * s


def solve_spectrum(pair: WeightedOperatorPair, count: int) -> Spectrum:
    """Lowest ``count`` eigenpairs of the dense symmetric-definite pencil (K, M)."""
    size = pair.size
    if count < 1 or count > size:
        raise InsufficientSpectrum(f"count must be in [1, {size}], got {count}")
    K = pair.K.toarray()
    M = pair.M.toarray()
    try:
        lam, U = scipy.linalg.eigh(K, M, subset_by_index=[0, count - 1], driver="gvx")
    except np.linalg.LinAlgError as exc:
        raise MassNotSPD(f"generalized eigensolve failed: {exc}") from exc
    U = fix_signs(U)
    gram = U.T @ (pair.M @ U)
    defect = float(np.abs(gram - np.eye(count)).max())
    sp_ = pair.space
    tag = f"fem:{sp_.geometry.kind}:n={sp_.geometry.n}:res={sp_.resolution}:tensor={pair.tensor}"
    return Spectrum(lam, U, pair.bc, "fem", tag, defect, pair)


def sphere_multiplicity(n: int, k: int) -> int:
    """Dimension of degree-k spherical harmonics on S^n."""
    return math.comb(n + k, n) - (math.comb(n + k - 2, n) if k >= 2 else 0)


def sphere_eigenvalue(n: int, r: int, k: int) -> float:
    return math.comb(n - 1, r) * n ** (-r / 2.0) * k * (k + n - 1) / n


def analytic_sphere_spectrum(n: int, r: int, count: int) -> Spectrum:
    """Closed spectrum of the weighted Newton operator on S^n(sqrt n), repeated by multiplicity."""
    if n < 1:
        raise ValueError("n must be positive")
    _check_order(n, r)
    vals = []
    k = 0
    while len(vals) < count:
        vals.extend([sphere_eigenvalue(n, r, k)] * sphere_multiplicity(n, k))
        k += 1
    return Spectrum(np.array(vals[:count]), None, "closed", "oracle", f"oracle:sphere:n={n}:r={r}")


@dataclass
class Cluster:
    value: float
    multiplicity: int
    start: int
    stop: int


@dataclass
class MultiplicityClusters:
    clusters: list
    tol: float

    def cluster_of(self, index: int) -> int:
        for cid, c in enumerate(self.clusters):
            if c.start <= index <= c.stop:
                return cid
        raise IndexError(index)

    def multiplicity_of(self, index: int) -> int:
        return self.clusters[self.cluster_of(index)].multiplicity


def default_cluster_tol(spectrum: Spectrum) -> float:
    return 1e-12 if spectrum.source == "oracle" else 1e-3


def group_multiplicities(spectrum: Spectrum, tol: Optional[float] = None, atol: float = 1e-10) -> MultiplicityClusters:
    """Greedy clustering: consecutive eigenvalues join when their gap is within tol relative."""
    if tol is None:
        tol = default_cluster_tol(spectrum)
    vals = spectrum.values
    clusters = []
    start = 0
    for j in range(1, len(vals) + 1):
        if j < len(vals):
            a, b = vals[j - 1], vals[j]
            if abs(b - a) <= tol * max(abs(a), abs(b)) or abs(b - a) <= atol:
                continue
        members = vals[start:j]
        clusters.append(Cluster(float(np.mean(members)), j - start,
                                start + spectrum.first_index, j - 1 + spectrum.first_index))
        start = j
    return MultiplicityClusters(clusters, tol)


def write_eigenvalue_csv(path, spectrum: Spectrum, clusters: Optional[MultiplicityClusters] = None) -> None:
    """CSV with columns index, lambda, cluster_id, multiplicity."""
    if clusters is None:
        clusters = group_multiplicities(spectrum)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "lambda", "cluster_id", "multiplicity"])
        for i in spectrum.indices:
            cid = clusters.cluster_of(int(i))
            w.writerow([int(i), format(spectrum.lam(int(i)), ".17g"), cid, clusters.clusters[cid].multiplicity])
