import math

import numpy as np
import pytest

from shrinker_spectra import geometry as geo
from shrinker_spectra.discretization import constant_function, coordinate_functions, linear_combination
from shrinker_spectra.errors import OracleSpectrum
from shrinker_spectra.geometry import ambient_stats, analytic_sphere_stats
from shrinker_spectra.inequalities import (
    InequalityReport,
    audit_identities,
    build_orthogonalized_trials,
    check_gap_bounds,
    check_general,
    check_shrinker_theorems,
    drift_laplacian_specialization,
    implied_bound_sequence,
    implied_next_bound,
    quadratic_terms,
    summarize,
    trial_moments,
    triangularizing_rotation,
)
from shrinker_spectra.spectrum import analytic_sphere_spectrum


def test_report_pass_rule():
    assert InequalityReport("t", 1.0, 1.0).passed
    assert InequalityReport("t", 1.0005, 1.0, tol_rel=1e-3).passed
    assert not InequalityReport("t", 1.002, 1.0, tol_rel=1e-3).passed
    assert not InequalityReport("t", math.nan, 1.0).passed
    r = InequalityReport("t", 0.5, 2.0)
    assert r.slack == 1.5 and r.relative_slack == 0.75


@pytest.mark.parametrize("fixture, k", [("circle256", 6), ("cap16", 6), ("disk_aniso", 5)])
def test_moment_identities(request, fixture, k):
    p = request.getfixturevalue(fixture)
    h = coordinate_functions(p.space)[0]
    led = audit_identities(trial_moments(p.spectrum, p.space, h, k))
    assert led.passed
    for e in led.entries:
        if e.gated:
            assert e.relative < 1e-9, e.name


def test_constant_trial_gives_trivial_moments(cap16):
    c = 2.5
    im = trial_moments(cap16.spectrum, cap16.space, constant_function(cap16.space, c), 5)
    np.testing.assert_allclose(im.a, c * np.eye(5), atol=1e-10)
    assert np.abs(im.b).max() < 1e-8
    assert np.abs(im.c).max() < 1e-8
    assert np.abs(im.G).max() < 1e-8 and np.abs(im.R).max() < 1e-8


def test_identity_tensor_commutators(disk_identity):
    # with T = I the two commutators coincide up to the factor 2
    p = disk_identity
    h = coordinate_functions(p.space)[1]
    im = trial_moments(p.spectrum, p.space, h, 5)
    np.testing.assert_allclose(im.b, 2 * im.c, atol=1e-9 * np.abs(im.b).max())
    np.testing.assert_allclose(im.G, im.GI, rtol=1e-9)
    np.testing.assert_allclose(im.R, 4 * im.Q, rtol=1e-9)


def test_scaling_trial_scales_quadratically(cap16):
    h = coordinate_functions(cap16.space)[0]
    a = trial_moments(cap16.spectrum, cap16.space, h, 4)
    b = trial_moments(cap16.spectrum, cap16.space, h.scaled(3.0), 4)
    for name in ("G", "GI", "R", "Q"):
        np.testing.assert_allclose(getattr(b, name), 9 * getattr(a, name), rtol=1e-10)
    np.testing.assert_allclose(b.a, 3 * a.a, rtol=1e-10, atol=1e-14)


@pytest.mark.parametrize("fixture, k", [("circle256", 5), ("sphere16", 5), ("cap16", 8), ("disk_aniso", 6)])
def test_general_bounds_hold(request, fixture, k):
    p = request.getfixturevalue(fixture)
    for h in coordinate_functions(p.space):
        reps = check_general(p.spectrum, p.space, h, k, tol_rel=1e-6)
        assert all(r.passed for r in reps), [r.as_dict() for r in reps]


def test_auto_delta_is_optimal(disk_aniso):
    p = disk_aniso
    h = linear_combination(coordinate_functions(p.space), [1.0, 0.5])
    im = trial_moments(p.spectrum, p.space, h, 4)
    auto = check_general(p.spectrum, p.space, h, 4, intermediates=im)[1]
    for s in (0.5, 2.0, 0.9, 1.1):
        fixed = check_general(p.spectrum, p.space, h, 4, delta=s * auto.params["delta"], intermediates=im)[1]
        assert auto.rhs <= fixed.rhs * (1 + 1e-14)
        assert fixed.lhs == auto.lhs
    with pytest.raises(ValueError):
        check_general(p.spectrum, p.space, h, 4, delta=-1.0, intermediates=im)


@pytest.mark.parametrize("fixture", ["cap16", "disk_aniso", "sphere16"])
def test_rotated_trials(request, fixture):
    p = request.getfixturevalue(fixture)
    rt = build_orthogonalized_trials(p.spectrum, p.space)
    N = p.geometry.N
    np.testing.assert_allclose(rt.O @ rt.O.T, np.eye(N), atol=1e-12)
    # O W^T is upper triangular, so h_A annihilates the moments against u_B, B < base + A
    OW = rt.O @ rt.W.T
    assert np.abs(np.tril(OW, -1)).max() <= 1e-12 * max(1.0, np.abs(rt.W).max())
    for A, B in rt.required_pairs():
        j = B - rt.base - 1
        assert abs(rt.O[A - 1] @ rt.W[j]) < 1e-12 * max(1.0, np.abs(rt.W).max())
    reps = check_gap_bounds(p.spectrum, p.space, rt)
    assert len(reps) == 2 * rt.A_max
    assert all(r.passed for r in reps)


def test_oracle_spectrum_has_no_moments(cap16):
    oracle = analytic_sphere_spectrum(2, 0, 6)
    with pytest.raises(OracleSpectrum):
        trial_moments(oracle, cap16.space, coordinate_functions(cap16.space)[0], 2)
    with pytest.raises(OracleSpectrum):
        build_orthogonalized_trials(oracle, cap16.space)


def test_quadratic_terms_hand_values():
    # n = 2, r = 0, xi = 1, max S = 1, min|x|^2 = 2: C = 2, w = lambda + 1/2
    lhs, rhs = quadratic_terms(np.array([1.0]), 3.0, 2, 0, 1.0, 1.0, 2.0)
    assert (lhs, rhs) == (4.0, 6.0)
    # (L - 1)^2 = 3 (L - 1) has larger root L = 4
    assert implied_next_bound(np.array([1.0]), 2, 0, 1.0, 1.0, 2.0) == pytest.approx(4.0)
    assert drift_laplacian_specialization(np.array([1.0]), 3.0, 2, 2.0) == (4.0, 6.0)


def test_implied_bound_is_attained_by_quadratic():
    lams = np.array([1.0, 2.5, 3.0])
    L = implied_next_bound(lams, 2, 0, 1.0, 1.3, 1.7)
    lhs, rhs = quadratic_terms(lams, L, 2, 0, 1.0, 1.3, 1.7)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_cap_dirichlet_theorems(cap32):
    stats = ambient_stats(cap32.space.geometry, cap32.space.samples(), 0)
    reps = check_shrinker_theorems(cap32.spectrum, stats, ks=range(1, 11))
    assert all(r.passed for r in reps)
    assert not any(r.equality for r in reps)
    for r in reps:
        if r.theorem == "thm11-quadratic":
            # r = 0 and S_0 = 1, xi = 1: the rhs is the r = 0 specialization
            assert r.params["specialization_rhs"] == pytest.approx(r.rhs, rel=1e-12)
            assert r.implied_bound >= cap32.spectrum.lam(r.params["k"] + 1) - 1e-9
    vals, monotone = implied_bound_sequence(cap32.spectrum, stats, range(1, 11))
    assert monotone and len(vals) == 10


def test_sphere_oracle_equalities():
    stats = analytic_sphere_stats(2, 0)
    reps = {r.theorem: r for r in check_shrinker_theorems(analytic_sphere_spectrum(2, 0, 10), stats)}
    assert reps["thm12-lambda1"].equality and reps["thm12-sumsqrt"].equality
    assert reps["thm12-sumsqrt"].lhs == pytest.approx(2.0, abs=1e-15)
    assert reps["cor13-first"].equality
    assert not reps["cor13-nth"].equality
    assert summarize(list(reps.values()))["failed"] == 0


def test_s3_r2_oracle():
    reps = {r.theorem: r for r in check_shrinker_theorems(analytic_sphere_spectrum(3, 2, 8), analytic_sphere_stats(3, 2))}
    assert reps["cor13-first"].lhs == pytest.approx(1 / 3, rel=1e-14)
    assert reps["cor13-first"].rhs == pytest.approx(1 / 3, rel=1e-14)
    assert reps["cor13-nth"].rhs == pytest.approx(3.0, rel=1e-14)
    assert all(r.passed for r in reps.values())
    assert reps["thm12-lambda1"].note


def test_cylinder_has_no_equality_flags():
    from conftest import Problem

    p = Problem(geo.cylinder_segment(), 16, bc="dirichlet", count=10)
    stats = ambient_stats(p.space.geometry, p.space.samples(), 0)
    reps = check_shrinker_theorems(p.spectrum, stats, ks=[2, 5])
    for h in coordinate_functions(p.space):
        reps += check_general(p.spectrum, p.space, h, 5)
    assert all(r.passed for r in reps)
    assert not any(r.equality for r in reps)


def test_rotation_is_identity_for_triangular_moments():
    W = np.array([[2.0, 0.0, 0.0], [0.5, 1.0, 0.0]])
    np.testing.assert_allclose(triangularizing_rotation(W), np.eye(3), atol=1e-15)
    assert triangularizing_rotation(np.zeros((0, 2))).shape == (2, 2)


def test_rotation_triangularizes_random_moments():
    rng = np.random.default_rng(3)
    W = rng.standard_normal((2, 3))
    O = triangularizing_rotation(W)
    R = O @ W.T
    np.testing.assert_allclose(O @ O.T, np.eye(3), atol=1e-14)
    assert np.abs(np.tril(R, -1)).max() < 1e-14
    assert np.all(np.diag(R) >= 0)


def test_interval_audit_passes():
    from conftest import Problem

    p = Problem(geo.flat_interval(), 128, tensor="identity", bc="dirichlet", count=8)
    led = audit_identities(trial_moments(p.spectrum, p.space, coordinate_functions(p.space)[0], 5))
    assert led.passed


def test_coarse_mesh_ledger_names_first_degraded():
    from conftest import Problem

    p = Problem(geo.spherical_cap(math.pi / 3), 8, bc="dirichlet", count=8)
    led = audit_identities(trial_moments(p.spectrum, p.space, coordinate_functions(p.space)[2], 5))
    # the discrete identities stay exact; the quadrature comparison carries the discretization error
    assert led.passed
    assert led.first_degraded == "quadrature_consistency"
    d = led.as_dict()
    assert d["first_degraded"] in {e["name"] for e in d["entries"]}
