"""Universal eigenvalue inequalities, proof moments and rotated coordinate trials.

Moments are computed in the discrete commutator calculus of the Galerkin
space: multiplication by h is the operator H = M^{-1} Hm (Hm the weighted
mass matrix of h), the operator is -M^{-1} K, and every integral is an
M-inner product.  With these definitions the moment identities hold to
round-off and the inequalities are exact statements about the discrete
spectrum, so they can be checked at tight tolerances.  A separate diagnostic
compares against straight quadrature of the continuum integrands.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .discretization import DiscreteSpace, TrialFunction, coordinate_functions, linear_combination
from .errors import InsufficientSpectrum, OracleSpectrum, RankCollapse
from .geometry import AmbientStats
from .operator import WeightedOperatorPair, identity_companion, weighted_mass
from .spectrum import MultiplicityClusters, Spectrum, group_multiplicities

ATOL = 1e-12
THEOREM_ORDER = (
    "thm21-2.2", "thm21-2.3", "thm21-2.5", "thm21-2.6", "thm11-quadratic", "thm11-sqrt",
    "thm12-lambda1", "thm12-sumsqrt", "cor13-first", "cor13-nth",
)
R_POSITIVE_NOTE = (
    "lambda_1 <= 1 for r > 0 is recorded as an observation: its supporting identity "
    "L(x_A) = -x_A holds for the r = 0 operator"
)


@dataclass
class InequalityReport:
    theorem: str
    lhs: float
    rhs: float
    tol_rel: float = 1e-3
    params: dict = field(default_factory=dict)
    implied_bound: Optional[float] = None
    equality: bool = False
    provenance: str = ""
    note: str = ""

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def relative_slack(self) -> float:
        return self.slack / abs(self.rhs) if self.rhs != 0 else (0.0 if self.slack == 0 else math.copysign(math.inf, self.slack))

    @property
    def passed(self) -> bool:
        return bool(math.isfinite(self.slack) and self.slack >= -(self.tol_rel * abs(self.rhs) + ATOL))

    def as_dict(self) -> dict:
        return {
            "theorem": self.theorem, "lhs": self.lhs, "rhs": self.rhs, "slack": self.slack,
            "relative_slack": self.relative_slack, "passed": self.passed, "tol_rel": self.tol_rel,
            "params": dict(self.params), "implied_bound": self.implied_bound,
            "equality": self.equality, "provenance": self.provenance, "note": self.note,
        }


def _equality(slack: float, rhs: float, eq_tol: float) -> bool:
    return bool(rhs > 0 and abs(slack) <= eq_tol * rhs)


def equality_tolerance(spectrum: Spectrum) -> float:
    return 1e-6 if spectrum.source == "oracle" else 1e-2


# The commutator-calculus bounds are exact statements about the discrete
# spectrum, with no discretization bias to absorb, so equality is round-off level.
DISCRETE_EQUALITY_TOL = 1e-6


def summarize(reports: Sequence[InequalityReport]) -> dict:
    """Run-level pass counts and the worst relative slack."""
    worst = min(reports, key=lambda r: r.relative_slack, default=None)
    return {
        "total": len(reports),
        "passed": sum(r.passed for r in reports),
        "failed": sum(not r.passed for r in reports),
        "equalities": sum(r.equality for r in reports),
        "worst_theorem": None if worst is None else worst.theorem,
        "worst_slack": None if worst is None else worst.slack,
        "worst_relative_slack": None if worst is None else worst.relative_slack,
    }


def sort_reports(reports):
    return sorted(reports, key=lambda r: (THEOREM_ORDER.index(r.theorem), sorted(r.params.items()).__repr__()))


# ---------------------------------------------------------------------------
# proof moments


@dataclass
class ProofIntermediates:
    """Moments of one trial function h against u_first..u_k.

    Index arrays are positions in ``indices``; ``lam`` are the matching
    eigenvalues and ``lam_next`` is lambda_{k+1}.  G is the integral of
    u_i^2 <grad h, T grad h>, GI the same with T = I, R the squared norm of
    u_i L h + 2 <grad u_i, T grad h>, Q that of u_i Delta_f h / 2 + <grad u_i, grad h>.
    """

    label: str
    k: int
    indices: np.ndarray
    lam: np.ndarray
    lam_next: float
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    G: np.ndarray
    GI: np.ndarray
    R: np.ndarray
    Q: np.ndarray
    P: np.ndarray
    energy: np.ndarray
    quad_G: np.ndarray
    quad_GI: np.ndarray
    h_scale: float = 0.0
    grad_scale: float = 0.0


def _identity_stiffness(pair: WeightedOperatorPair):
    if pair.tensor == "identity":
        return pair.K
    cached = getattr(pair, "_K_identity", None)
    if cached is None:
        cached = identity_companion(pair)
        pair._K_identity = cached
    return cached


def trial_moments(spectrum: Spectrum, space: DiscreteSpace, h: TrialFunction, k: int) -> ProofIntermediates:
    """All proof-internal moments for indices first..k of a FEM spectrum."""
    if spectrum.vectors is None or spectrum.pair is None:
        raise OracleSpectrum("moments need eigenfunctions; analytic spectra carry none")
    first = spectrum.first_index
    if k < first:
        raise InsufficientSpectrum(f"k must be at least {first}")
    spectrum.require(k + 1)
    pair = spectrum.pair
    idx = np.arange(first, k + 1)
    U = spectrum.vectors[:, : len(idx)]
    lam = spectrum.values[: len(idx)].astype(float)
    M, K = pair.M, pair.K
    KI = _identity_stiffness(pair)
    Hm = weighted_mass(space, h.quad, pair.free)

    HU = Hm @ U
    W = pair.mass_solve(HU)  # H u_i
    a = U.T @ HU
    Z = pair.mass_solve(-(K @ W)) + W * lam  # [L, H] u_i
    MZ = M @ Z
    b = MZ.T @ U  # b[i, j] = <u_j, [L, H] u_i>
    Y = 0.5 * (pair.mass_solve(-(KI @ W)) + pair.mass_solve(Hm @ pair.mass_solve(KI @ U)))
    MY = M @ Y
    c = MY.T @ U
    MW = M @ W
    G = -np.einsum("ai,ai->i", W, MZ)
    GI = -2.0 * np.einsum("ai,ai->i", W, MY)
    R = np.einsum("ai,ai->i", Z, MZ)
    Qv = np.einsum("ai,ai->i", Y, MY)
    energy = np.einsum("ai,ai->i", W, K @ W) - lam * np.einsum("ai,ai->i", W, MW)
    P = G + ((lam[:, None] - lam[None, :]) * a**2).sum(axis=1)

    # straight quadrature of the continuum integrands, for diagnostics only
    Ufull = pair.to_full(U)
    uq = np.stack([space.interpolate_at_quad(Ufull[:, j]) for j in range(len(idx))], axis=1)
    Tc = pair.tensor_contravariant
    gTg = np.einsum("mi,mij,mj->m", h.quad_grad, Tc, h.quad_grad)
    gg = np.einsum("mi,mij,mj->m", h.quad_grad, space.points.metric_inv, h.quad_grad)
    w = space.quad_weights
    quad_G = (w * gTg) @ uq**2
    quad_GI = (w * gg) @ uq**2
    return ProofIntermediates(h.label, k, idx, lam, spectrum.lam(k + 1), a, b, c, G, GI, R, Qv, P,
                              energy, quad_G, quad_GI, float(np.abs(h.quad).max()), float(np.sqrt(gg.max())))


@dataclass
class AuditEntry:
    name: str
    error: float
    scale: float
    tol: float
    gated: bool = True

    @property
    def relative(self) -> float:
        return self.error / self.scale if self.scale > 0 else self.error

    @property
    def passed(self) -> bool:
        return self.error <= self.tol * self.scale + ATOL

    def as_dict(self):
        return {"name": self.name, "error": self.error, "scale": self.scale, "relative": self.relative,
                "tol": self.tol, "gated": self.gated, "passed": self.passed}


@dataclass
class AuditLedger:
    label: str
    entries: list

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries if e.gated)

    @property
    def first_degraded(self) -> str:
        """Entry with the largest error relative to its own tolerance."""
        return max(self.entries, key=lambda e: e.relative / e.tol).name

    def as_dict(self):
        return {"label": self.label, "passed": self.passed, "first_degraded": self.first_degraded,
                "entries": [e.as_dict() for e in self.entries]}


def audit_identities(im: ProofIntermediates, tol: float = 1e-7, quad_tol: float = 1e-2) -> AuditLedger:
    """Check the moment identities; the last entry is an ungated quadrature diagnostic."""
    lam = im.lam
    gap = lam[None, :] - lam[:, None]  # gap[i, j] = lam_j - lam_i
    # |a_ij| <= sup|h| and |c_ij| <~ sqrt(lambda) sup|grad h| give scales that survive vanishing moments
    a_scale = max(float(np.abs(im.a).max()), im.h_scale)
    b_scale = max(float(np.abs(im.b).max()), float(np.abs(lam).max()) * a_scale)
    c_scale = max(float(np.abs(im.c).max()), math.sqrt(float(np.abs(lam).max())) * im.grad_scale)
    e_scale = float(max(np.abs(im.G).max(), np.abs(im.energy).max()))
    q_scale = float(np.abs(im.quad_G).max())
    entries = [
        AuditEntry("a_symmetric", float(np.abs(im.a - im.a.T).max()), a_scale, min(tol, 1e-10)),
        AuditEntry("b_ji=(lam_j-lam_i)a_ij", float(np.abs(im.b.T - gap * im.a).max()), b_scale, tol),
        AuditEntry("b_antisymmetric", float(np.abs(im.b + im.b.T).max()), b_scale, tol),
        AuditEntry("c_antisymmetric", float(np.abs(im.c + im.c.T).max()), c_scale, tol),
        AuditEntry("stokes", float(np.abs(im.G - im.energy).max()), e_scale, tol),
        AuditEntry("quadrature_consistency", float(np.abs(im.G - im.quad_G).max()), q_scale, quad_tol, gated=False),
    ]
    return AuditLedger(im.label, entries)


def _auto_delta(X: float, Y: float):
    """Minimizer of delta X + Y / delta over delta > 0 (1 when degenerate)."""
    if X > 0 and Y > 0:
        return math.sqrt(Y / X)
    return 1.0


def check_general(spectrum: Spectrum, space: DiscreteSpace, h: TrialFunction, k: int,
                  delta: Union[float, str] = "auto", tol_rel: float = 1e-3,
                  intermediates: Optional[ProofIntermediates] = None) -> list:
    """Reports for the two general bounds with trial function h and truncation k."""
    im = intermediates if intermediates is not None else trial_moments(spectrum, space, h, k)
    d = im.lam_next - im.lam
    X = float(np.sum(d**2 * im.G))
    Y = float(np.sum(d * im.Q))
    if delta == "auto":
        dval, policy = _auto_delta(X, Y), "auto"
    else:
        dval, policy = float(delta), "fixed"
        if not dval > 0:
            raise ValueError("delta must be positive")
    eq = DISCRETE_EQUALITY_TOL
    base = {"k": k, "r": space.r, "h": h.label}
    lhs2, rhs2 = X, float(np.sum(d * im.R))
    lhs3, rhs3 = float(np.sum(d**2 * im.GI)), dval * X + Y / dval
    return [
        InequalityReport("thm21-2.2", lhs2, rhs2, tol_rel, dict(base), None,
                         _equality(rhs2 - lhs2, rhs2, eq), spectrum.discretization),
        InequalityReport("thm21-2.3", lhs3, rhs3, tol_rel, dict(base, delta=dval, delta_policy=policy), None,
                         _equality(rhs3 - lhs3, rhs3, eq), spectrum.discretization),
    ]


# ---------------------------------------------------------------------------
# rotated trials


@dataclass
class RotatedTrials:
    O: np.ndarray
    trials: list
    base: int
    mode: str
    A_max: int
    W: np.ndarray
    defect: float

    def required_pairs(self):
        return [(A, B) for A in range(1, self.A_max + 1) for B in range(self.base + 1, self.base + A)]


def _moment(pair: WeightedOperatorPair, space: DiscreteSpace, h: TrialFunction, U: np.ndarray, ub: np.ndarray):
    Hm = weighted_mass(space, h.quad, pair.free)
    return U.T @ (Hm @ ub)


def triangularizing_rotation(W: np.ndarray) -> np.ndarray:
    """Orthogonal O with O W^T upper triangular and a non-negative diagonal.

    ``W`` has shape (m, N).  Columns of the complete QR factor are sign-fixed so
    the result is unique when W has full row rank.
    """
    N = W.shape[1]
    if W.shape[0] == 0:
        return np.eye(N)
    Qm, Rm = np.linalg.qr(W.T, mode="complete")
    p = min(Rm.shape)
    for j in range(N):
        ref = Rm[j, j] if j < p else Qm[j, j]
        if ref < 0:
            Qm[:, j] *= -1.0
    return Qm.T


def build_orthogonalized_trials(spectrum: Spectrum, space: DiscreteSpace, mode: Optional[str] = None,
                                A_max: Optional[int] = None, tol: float = 1e-9) -> RotatedTrials:
    """Rotate the coordinate functions so that int h_A u_base u_B dmu = 0 for the required B.

    Dirichlet gap mode uses u_1 and B = 2..A; closed mode uses u_0 and B = 1..A-1.
    With W[B, C] = int x_C u_base u_B, the rotation O is Q^T from the QR
    factorization of W^T, so O W^T is upper triangular.
    """
    if spectrum.vectors is None or spectrum.pair is None:
        raise OracleSpectrum("rotated trials need eigenfunctions")
    if mode is None:
        mode = "closed" if spectrum.problem == "closed" else "dirichlet-gap"
    base = 0 if mode == "closed" else 1
    if base < spectrum.first_index:
        raise ValueError(f"mode {mode!r} needs u_{base}, absent from a {spectrum.problem} spectrum")
    coords = coordinate_functions(space)
    N = len(coords)
    if A_max is None:
        A_max = N
    A_max = min(A_max, N)
    spectrum.require(base + A_max - 1)
    pair = spectrum.pair
    ub = spectrum.vector(base)
    B_idx = list(range(base + 1, base + A_max))
    U = np.stack([spectrum.vector(B) for B in B_idx], axis=1) if B_idx else np.zeros((len(ub), 0))
    W = np.stack([_moment(pair, space, x, U, ub) for x in coords], axis=1)  # (len(B), N)
    O = triangularizing_rotation(W)
    trials = [linear_combination(coords, O[A], label=f"rotated h_{A + 1}") for A in range(N)]
    defect = 0.0
    for A in range(1, A_max + 1):
        for j, B in enumerate(B_idx):
            if B < base + A:
                defect = max(defect, abs(float(O[A - 1] @ W[j])))
    scale = max(1.0, float(np.abs(W).max()) if W.size else 1.0)
    if defect > tol * scale:
        raise RankCollapse(f"rotated moments not annihilated (defect {defect:.3e})")
    return RotatedTrials(O, trials, base, mode, A_max, W, defect)


def check_gap_bounds(spectrum: Spectrum, space: DiscreteSpace, trials: RotatedTrials,
                     delta: Union[float, str] = "auto", tol_rel: float = 1e-3) -> list:
    """Gap bounds for every A = 1..A_max with the rotated trial h_A."""
    b = trials.base
    spectrum.require(b + trials.A_max)
    eq = DISCRETE_EQUALITY_TOL
    out = []
    lam_b = spectrum.lam(b)
    for A in range(1, trials.A_max + 1):
        h = trials.trials[A - 1]
        im = trial_moments(spectrum, space, h, b)
        G, GI, R, Q = float(im.G[-1]), float(im.GI[-1]), float(im.R[-1]), float(im.Q[-1])
        gap = spectrum.lam(A + b) - lam_b
        dval, policy = (_auto_delta(G, Q), "auto") if delta == "auto" else (float(delta), "fixed")
        params = {"A": A, "r": space.r, "base": b, "gap": gap, "omega": G, "defect": trials.defect}
        lhs5, rhs5 = gap * G, R
        lhs6, rhs6 = math.sqrt(max(gap, 0.0)) * GI, dval * G + Q / dval
        out.append(InequalityReport("thm21-2.5", lhs5, rhs5, tol_rel, dict(params), None,
                                    _equality(rhs5 - lhs5, rhs5, eq), spectrum.discretization))
        out.append(InequalityReport("thm21-2.6", lhs6, rhs6, tol_rel, dict(params, delta=dval, delta_policy=policy),
                                    None, _equality(rhs6 - lhs6, rhs6, eq), spectrum.discretization))
    return out


# ---------------------------------------------------------------------------
# shrinker theorems


def quadratic_terms(lams: np.ndarray, lam_next: float, n: int, r: int, xi: float, max_S: float, min_x2: float):
    """LHS and RHS of the Dirichlet quadratic bound for lambda_1..lambda_k and lambda_{k+1}."""
    C = 4.0 * (n - r) * max_S / n**2
    w = lams / xi + (2.0 * n - min_x2) / 4.0
    d = lam_next - lams
    return float(np.sum(d**2)), float(C * np.sum(d * w))


def implied_next_bound(lams: np.ndarray, n: int, r: int, xi: float, max_S: float, min_x2: float) -> float:
    """Larger root in L of sum (L - l_i)^2 = C sum (L - l_i) w_i, floored at lambda_k."""
    k = len(lams)
    C = 4.0 * (n - r) * max_S / n**2
    w = lams / xi + (2.0 * n - min_x2) / 4.0
    qa = float(k)
    qb = -(2.0 * np.sum(lams) + C * np.sum(w))
    qc = float(np.sum(lams**2) + C * np.sum(lams * w))
    disc = qb * qb - 4.0 * qa * qc
    root = (-qb + math.sqrt(max(disc, 0.0))) / (2.0 * qa)
    return max(root, float(lams[-1]))


def drift_laplacian_specialization(lams: np.ndarray, lam_next: float, n: int, min_x2: float):
    """The r = 0 specialization: sum d_i^2 <= (4/n) sum d_i (lambda_i + (2n - min|x|^2)/4)."""
    d = lam_next - lams
    return float(np.sum(d**2)), float(4.0 / n * np.sum(d * (lams + (2.0 * n - min_x2) / 4.0)))


def check_shrinker_theorems(spectrum: Spectrum, stats: AmbientStats, mode: Optional[str] = None,
                            ks: Optional[Sequence[int]] = None, tol_rel: float = 1e-3,
                            clusters: Optional[MultiplicityClusters] = None) -> list:
    """Dirichlet: quadratic and square-root gap bounds.  Closed: the four closed-problem bounds."""
    if mode is None:
        mode = spectrum.problem
    n, N, r = stats.n, stats.N, stats.r
    eq = equality_tolerance(spectrum)
    common = {"r": r, "xi": stats.xi, "max_S": stats.max_S, "min_x2": stats.min_x2, "vol": stats.vol}
    prov = spectrum.discretization
    out = []
    if mode == "dirichlet":
        if ks is None:
            ks = [spectrum.last_index - 1]
        for k in ks:
            spectrum.require(k + 1)
            lams = np.array([spectrum.lam(i) for i in range(1, k + 1)])
            nxt = spectrum.lam(k + 1)
            lhs, rhs = quadratic_terms(lams, nxt, n, r, stats.xi, stats.max_S, stats.min_x2)
            params = dict(common, k=k)
            if r == 0:
                params["specialization_rhs"] = drift_laplacian_specialization(lams, nxt, n, stats.min_x2)[1]
            bound = implied_next_bound(lams, n, r, stats.xi, stats.max_S, stats.min_x2)
            out.append(InequalityReport("thm11-quadratic", lhs, rhs, tol_rel, params, bound,
                                        _equality(rhs - lhs, rhs, eq), prov))
        spectrum.require(n + 1)
        l1 = spectrum.lam(1)
        lhs = float(sum(math.sqrt(max(spectrum.lam(i + 1) - l1, 0.0)) for i in range(1, n + 1)))
        rhs = 2.0 * math.sqrt((n - r) * stats.max_S * (l1 / stats.xi + (2.0 * n - stats.min_x2) / 4.0))
        out.append(InequalityReport("thm11-sqrt", lhs, rhs, tol_rel, dict(common), None,
                                    _equality(rhs - lhs, rhs, eq), prov))
        return out
    if mode != "closed":
        raise ValueError(f"unknown mode {mode!r}")
    spectrum.require(n)
    if clusters is None:
        clusters = group_multiplicities(spectrum)
    full = clusters.multiplicity_of(1) >= N
    l1 = spectrum.lam(1)
    mean_S = stats.integral_S / stats.vol
    params = dict(common, integral_S=stats.integral_S, multiplicity_1=clusters.multiplicity_of(1))

    def rep(tid, lhs, rhs, needs_cluster, note=""):
        flag = _equality(rhs - lhs, rhs, eq) and (full or not needs_cluster)
        return InequalityReport(tid, float(lhs), float(rhs), tol_rel, dict(params), None, flag, prov, note)

    out.append(rep("thm12-lambda1", l1, 1.0, True, R_POSITIVE_NOTE if r > 0 else ""))
    out.append(rep("thm12-sumsqrt", sum(math.sqrt(max(spectrum.lam(i), 0.0)) for i in range(1, n + 1)),
                   math.sqrt(n * (n - r) * mean_S), True))
    out.append(rep("cor13-first", l1, (n - r) / n * mean_S, True))
    out.append(rep("cor13-nth", spectrum.lam(n), n * (n - r) * mean_S, False))
    return out


def implied_bound_sequence(spectrum: Spectrum, stats: AmbientStats, ks: Sequence[int]):
    """Implied lambda_{k+1} ceilings for each k, with a flag for any decrease in k."""
    vals = []
    for k in ks:
        lams = np.array([spectrum.lam(i) for i in range(1, k + 1)])
        vals.append(implied_next_bound(lams, stats.n, stats.r, stats.xi, stats.max_S, stats.min_x2))
    monotone = all(b >= a - 1e-12 * abs(a) for a, b in zip(vals, vals[1:]))
    return vals, monotone
