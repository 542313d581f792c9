"""Acceptance criteria, each at its stated tolerance and runtime limit."""
import math
import time
from pathlib import Path

import numpy as np
import pytest

from shrinker_spectra import geometry as geo
from shrinker_spectra.cli import main
from shrinker_spectra.discretization import build_space, coordinate_functions
from shrinker_spectra.geometry import ambient_stats, analytic_sphere_stats
from shrinker_spectra.inequalities import (
    audit_identities,
    build_orthogonalized_trials,
    check_gap_bounds,
    check_general,
    check_shrinker_theorems,
    trial_moments,
)
from shrinker_spectra.operator import apply_operator, assemble_pair
from shrinker_spectra.scenario import load_scenario, run_pipeline
from shrinker_spectra.spectrum import analytic_sphere_spectrum, group_multiplicities, solve_spectrum

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
SUITE = sorted(SCENARIOS.glob("*.json"))


def _by_theorem(reports):
    return {r.theorem: r for r in reports}


@pytest.mark.criterion(1, "circle: lambda_1 in [0.999, 1.005], lambda_1 <= 1 within 1e-2, multiplicity 2, < 5 s")
def test_circle_equality():
    t0 = time.perf_counter()
    space = build_space(geo.circle(), 256, 0)
    spectrum = solve_spectrum(assemble_pair(space), 8)
    clusters = group_multiplicities(spectrum)
    stats = ambient_stats(space.geometry, space.samples(), 0)
    reps = _by_theorem(check_shrinker_theorems(spectrum, stats, clusters=clusters, tol_rel=1e-2))
    elapsed = time.perf_counter() - t0
    l1 = spectrum.lam(1)
    print(f"circle lambda_1 = {l1:.8f}, slack = {reps['thm12-lambda1'].slack:.3e}, {elapsed:.2f} s")
    assert 0.999 <= l1 <= 1.005
    assert reps["thm12-lambda1"].slack >= -1e-2
    assert reps["thm12-lambda1"].passed
    assert clusters.multiplicity_of(1) == 2
    assert elapsed < 5.0


@pytest.mark.criterion(2, "sphere oracle n=2: sum sqrt(lambda_i) = 2 to 1e-12 with equality flag, < 1 s")
def test_sphere_sum_sqrt_equality():
    t0 = time.perf_counter()
    spectrum = analytic_sphere_spectrum(2, 0, 10)
    reps = _by_theorem(check_shrinker_theorems(spectrum, analytic_sphere_stats(2, 0)))
    elapsed = time.perf_counter() - t0
    rep = reps["thm12-sumsqrt"]
    assert rep.rhs == pytest.approx(math.sqrt(2 * 2), rel=1e-15)
    assert abs(rep.lhs - rep.rhs) / rep.rhs <= 1e-12
    assert rep.equality
    assert spectrum.lam(1) == spectrum.lam(2) == spectrum.lam(3)
    assert elapsed < 1.0


@pytest.mark.criterion(3, "oracle n=3, r=2: lambda_1 = 1/3 equals the first corollary bound, second strict, < 1 s")
def test_corollary_equality_r2():
    t0 = time.perf_counter()
    spectrum = analytic_sphere_spectrum(3, 2, 12)
    reps = _by_theorem(check_shrinker_theorems(spectrum, analytic_sphere_stats(3, 2)))
    elapsed = time.perf_counter() - t0
    first, nth = reps["cor13-first"], reps["cor13-nth"]
    assert spectrum.lam(1) == pytest.approx(1 / 3, rel=1e-15)
    assert abs(first.lhs - first.rhs) <= 1e-12 * first.rhs
    assert first.equality and first.passed
    assert nth.slack > 0 and not nth.equality
    assert elapsed < 1.0


@pytest.mark.criterion(4, "sphere FEM with >= 2500 nodes: first nonzero eigenvalue within 1% of 1, multiplicity 3, < 60 s")
def test_fem_oracle_agreement():
    t0 = time.perf_counter()
    space = build_space(geo.sphere(2), 16, 0)
    spectrum = solve_spectrum(assemble_pair(space), 10)
    clusters = group_multiplicities(spectrum)
    elapsed = time.perf_counter() - t0
    print(f"sphere nodes = {space.n_nodes}, lambda_1 = {spectrum.lam(1):.6f}, {elapsed:.2f} s")
    assert space.n_nodes >= 2500
    assert abs(spectrum.lam(1) - 1.0) <= 1e-2
    assert clusters.clusters[1].multiplicity == 3
    assert elapsed < 60.0


@pytest.mark.criterion(5, "cap Dirichlet suite k = 1..10 within 1e-3, matches the r = 0 specialization, < 120 s")
def test_dirichlet_cap_suite():
    t0 = time.perf_counter()
    space = build_space(geo.spherical_cap(math.pi / 3), 32, 0)
    spectrum = solve_spectrum(assemble_pair(space, bc="dirichlet"), 12)
    stats = ambient_stats(space.geometry, space.samples(), 0)
    reps = check_shrinker_theorems(spectrum, stats, ks=range(1, 11), tol_rel=1e-3)
    elapsed = time.perf_counter() - t0
    quad = [r for r in reps if r.theorem == "thm11-quadratic"]
    sqrt_rep = [r for r in reps if r.theorem == "thm11-sqrt"]
    assert [r.params["k"] for r in quad] == list(range(1, 11))
    assert len(sqrt_rep) == 1
    for r in reps:
        assert r.slack >= -1e-3 * abs(r.rhs), r.as_dict()
    assert stats.max_S == 1.0 and stats.xi == 1.0
    for r in quad:
        assert r.params["specialization_rhs"] == pytest.approx(r.rhs, rel=1e-12)
    assert elapsed < 120.0


@pytest.mark.criterion(6, "disk T = diag(2,1): bounds with k = 1..6, delta in {0.5, auto, 2}, rotated A <= 2, < 60 s")
def test_general_suite_disk():
    t0 = time.perf_counter()
    space = build_space(geo.flat_disk(weight="gaussian"), 24, 0)
    spectrum = solve_spectrum(assemble_pair(space, np.diag([2.0, 1.0]), "dirichlet"), 10)
    reps = []
    for h in coordinate_functions(space):
        for k in range(1, 7):
            im = trial_moments(spectrum, space, h, k)
            for delta in (0.5, "auto", 2.0):
                reps += check_general(spectrum, space, h, k, delta, tol_rel=1e-3, intermediates=im)
    rotated = build_orthogonalized_trials(spectrum, space, A_max=2)
    gap_reps = []
    for delta in (0.5, "auto", 2.0):
        gap_reps += check_gap_bounds(spectrum, space, rotated, delta, tol_rel=1e-3)
    elapsed = time.perf_counter() - t0
    assert len(reps) == 2 * 6 * 3 * 2
    assert len(gap_reps) == 3 * 2 * 2
    for r in reps + gap_reps:
        assert r.slack >= -1e-3 * abs(r.rhs), r.as_dict()
    assert rotated.defect <= 1e-9
    assert elapsed < 60.0


@pytest.mark.criterion(7, "moment identities on circle and cap at 1e-7 for the first 6 eigenpairs")
@pytest.mark.parametrize("fixture", ["circle256", "cap32"])
def test_identity_audit(request, fixture):
    p = request.getfixturevalue(fixture)
    k = p.spectrum.first_index + 5
    for h in coordinate_functions(p.space):
        ledger = audit_identities(trial_moments(p.spectrum, p.space, h, k), tol=1e-7)
        names = {e.name for e in ledger.entries if e.gated}
        assert {"b_ji=(lam_j-lam_i)a_ij", "b_antisymmetric", "c_antisymmetric", "stokes"} <= names
        for e in ledger.entries:
            if e.gated:
                assert e.error <= 1e-7 * e.scale + 1e-12, (h.label, e.as_dict())


def _coordinate_residual(geometry, res):
    space = build_space(geometry, res, 0)
    pair = assemble_pair(space)
    return max(float(np.abs(apply_operator(space, pair, x) + x.nodal).max()) for x in coordinate_functions(space))


@pytest.mark.criterion(8, "L(x_A) + x_A residual shrinks >= 3x per halving on circle and sphere")
@pytest.mark.parametrize("geometry, resolutions", [
    (geo.circle(), (64, 128, 256)),
    (geo.sphere(2), (4, 8, 16)),
], ids=["circle", "sphere"])
def test_operator_identity(geometry, resolutions):
    errs = [_coordinate_residual(geometry, r) for r in resolutions]
    print(f"{geometry.kind} residuals: " + ", ".join(f"{e:.3e}" for e in errs))
    for coarse, fine in zip(errs, errs[1:]):
        assert coarse / fine >= 3.0


@pytest.fixture(scope="module")
def suite_runs(tmp_path_factory):
    """Check every shipped scenario twice, into separate output directories."""
    root = tmp_path_factory.mktemp("suite")
    codes = {}
    for run in ("a", "b"):
        for path in SUITE:
            codes[(run, path.stem)] = main(["check", "--scenario", str(path), "--out", str(root / run / path.stem)])
    return root, codes


@pytest.mark.criterion(9, "structural invariants hold on every scenario in the suite")
@pytest.mark.parametrize("path", SUITE, ids=[p.stem for p in SUITE])
def test_structural_invariants(path):
    sc = load_scenario(path)
    result = run_pipeline(sc, "check")
    invariants = result.document["invariants"]
    required = {"trace_newton", "recursion_vs_kronecker"}
    if result.spectrum.source == "oracle":
        # no mesh: only the pointwise tensor identities apply
        assert required <= set(invariants)
        assert all(item["passed"] for item in invariants.values() if item["gated"])
        return
    required |= {"coordinate_gradient_sum", "orthonormality"}
    assert required <= set(invariants)
    for name, item in invariants.items():
        if item["gated"]:
            assert item["passed"], (name, item)


@pytest.mark.criterion(10, "two runs of the full suite give byte-identical report.json files")
def test_determinism(suite_runs):
    root, codes = suite_runs
    for path in SUITE:
        a = (root / "a" / path.stem / "report.json").read_bytes()
        b = (root / "b" / path.stem / "report.json").read_bytes()
        assert a == b, path.stem
        assert codes[("a", path.stem)] == codes[("b", path.stem)] == 0
