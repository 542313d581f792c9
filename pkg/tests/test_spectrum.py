import csv
import math

import numpy as np
import pytest
from scipy.special import jn_zeros

from shrinker_spectra import geometry as geo
from shrinker_spectra.discretization import build_space
from shrinker_spectra.errors import DimensionMismatch, InsufficientSpectrum, OddOrderRequested, OracleSpectrum
from shrinker_spectra.operator import assemble_pair
from shrinker_spectra.spectrum import (
    Spectrum,
    analytic_sphere_spectrum,
    fix_signs,
    group_multiplicities,
    solve_spectrum,
    sphere_eigenvalue,
    sphere_multiplicity,
    write_eigenvalue_csv,
)


def _spectrum(g, res, tensor="newton", bc="closed", count=10):
    space = build_space(g, res)
    return solve_spectrum(assemble_pair(space, tensor, bc), count)


def test_interval_dirichlet_squares():
    sp_ = _spectrum(geo.flat_interval(), 512, "identity", "dirichlet", 8)
    assert sp_.first_index == 1
    k = np.arange(1, 9)
    np.testing.assert_allclose(sp_.values, k**2, rtol=5e-3)
    assert np.all(sp_.values >= k**2)


def test_circle_spectrum_and_upper_bounds(circle256):
    sp_ = circle256.spectrum
    exact = np.array([0, 1, 1, 4, 4, 9, 9, 16, 16, 25, 25, 36], dtype=float)
    # P1 relative error is about (k h)^2 / 12
    np.testing.assert_allclose(sp_.values, exact, rtol=3e-3, atol=1e-10)
    # conforming P1 with exact quadrature over-approximates every eigenvalue
    assert np.all(sp_.values[1:] >= exact[1:])
    assert sp_.orthonormality_defect < 1e-12
    assert sp_.first_index == 0 and sp_.lam(1) == pytest.approx(1.0, rel=1e-4)


def test_disk_dirichlet_bessel_upper_bound():
    sp_ = _spectrum(geo.flat_disk(), 24, "identity", "dirichlet", 1)
    exact = jn_zeros(0, 1)[0] ** 2
    assert exact <= sp_.values[0] <= exact * 1.01


def test_circle_refinement_order():
    errs = [abs(_spectrum(geo.circle(), N, count=4).values[3] - 4.0) for N in (32, 64, 128)]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(1.9 < p < 2.1 for p in orders)


def test_sphere_fem_clusters(sphere16):
    cl = group_multiplicities(sphere16.spectrum)
    assert [c.multiplicity for c in cl.clusters[:3]] == [1, 3, 5]
    assert cl.clusters[1].value == pytest.approx(1.0, rel=1e-3)
    assert cl.clusters[2].value == pytest.approx(3.0, rel=3e-3)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_sphere_multiplicity_matches_harmonic_count(n):
    # dimension of harmonic homogeneous polynomials: dim P_k - dim P_{k-2}
    def dimP(k):
        return math.comb(k + n, n) if k >= 0 else 0

    for k in range(6):
        assert sphere_multiplicity(n, k) == dimP(k) - dimP(k - 2)


def test_sphere_oracle():
    sp_ = analytic_sphere_spectrum(2, 0, 9)
    np.testing.assert_allclose(sp_.values, [0, 1, 1, 1, 3, 3, 3, 3, 3])
    assert sphere_eigenvalue(3, 2, 1) == pytest.approx(1.0 / 3.0)
    cl = group_multiplicities(analytic_sphere_spectrum(3, 0, 30))
    assert [c.multiplicity for c in cl.clusters] == [1, 4, 9, 16]
    with pytest.raises(OracleSpectrum):
        sp_.vector(1)
    with pytest.raises(OddOrderRequested):
        analytic_sphere_spectrum(3, 1, 4)
    with pytest.raises(DimensionMismatch):
        analytic_sphere_spectrum(2, 2, 4)


def test_indexing_errors(cap16):
    sp_ = cap16.spectrum
    assert sp_.first_index == 1 and sp_.last_index == 12
    with pytest.raises(InsufficientSpectrum):
        sp_.lam(0)
    with pytest.raises(InsufficientSpectrum):
        sp_.require(13)
    with pytest.raises(InsufficientSpectrum):
        solve_spectrum(cap16.pair, 0)


def test_eigenvectors_are_mass_orthonormal(cap16):
    U = cap16.spectrum.vectors
    np.testing.assert_allclose(U.T @ (cap16.pair.M @ U), np.eye(U.shape[1]), atol=1e-10)
    res = cap16.pair.K @ U - (cap16.pair.M @ U) * cap16.spectrum.values
    assert np.abs(res).max() < 1e-8 * cap16.spectrum.values.max()


def test_fix_signs():
    U = np.array([[1.0, -3.0], [-2.0, 1.0]])
    np.testing.assert_array_equal(fix_signs(U), [[-1.0, 3.0], [2.0, -1.0]])


def test_grouping_rule():
    sp_ = Spectrum(np.array([0.0, 1.0, 1.0005, 1.2, 2.0, 2.0]), None, "closed", "fem", "synthetic")
    cl = group_multiplicities(sp_)
    assert [c.multiplicity for c in cl.clusters] == [1, 2, 1, 2]
    assert cl.cluster_of(3) == 2 and cl.multiplicity_of(5) == 2
    tight = group_multiplicities(sp_, tol=1e-6)
    assert [c.multiplicity for c in tight.clusters] == [1, 1, 1, 1, 2]


def test_csv(tmp_path, sphere16):
    path = tmp_path / "eig.csv"
    write_eigenvalue_csv(path, sphere16.spectrum)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["index", "lambda", "cluster_id", "multiplicity"]
    assert len(rows) == 13
    assert rows[1][0] == "0" and rows[2][3] == "3"
    assert float(rows[5][1]) == sphere16.spectrum.lam(4)
