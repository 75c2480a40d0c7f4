import numpy as np
import pytest
import scipy.io
from numpy.testing import assert_allclose

from magspec.errors import BadMask, BadMetricProfile, ThinDomainUnderresolved, ZeroVector
from magspec.gauge import GaugeFunction, aharonov_bohm, harmonic_flux
from magspec.geometry import AnnulusDomain, MetricCylinder, circle
from magspec.operators import (GridSpec, RectilinearGrid, SubdomainSpec, assemble_annulus,
                               assemble_circle, assemble_cylinder, assemble_masked,
                               euler_characteristic, graded_edges, rayleigh_quotient)
from magspec.solver import smallest_eigenpairs

# radial shooting (solve_ivp, rtol 1e-13) for radii 1, 2 and angular index 1/2
CONCENTRIC_1_2_PHI_HALF = 0.11531566437098935


def test_gridspec_validation():
    with pytest.raises(ValueError):
        GridSpec(2, 64)
    with pytest.raises(ValueError):
        GridSpec(8, 63)


def test_circle_operator_hermitian_psd():
    op = assemble_circle(2 * np.pi, harmonic_flux(0.3, 2 * np.pi), n=64)
    S = op.stiffness.toarray()
    assert_allclose(S, S.conj().T, atol=1e-15)
    assert np.linalg.eigvalsh(S).min() > -1e-12


def test_neumann_interval_discrete_spectrum():
    n = 100
    h = 1.0 / n
    grid = RectilinearGrid(np.linspace(0, 1, n + 1), np.array([0.0, 1.0]))
    op = assemble_masked(grid, np.ones((n, 1), bool))
    vals = smallest_eigenpairs(op, k=3).eigenvalues
    k = np.arange(3)
    assert_allclose(vals, 4 / h**2 * np.sin(k * np.pi * h / 2) ** 2, atol=1e-9, rtol=1e-10)
    assert_allclose(vals[1:], [np.pi**2, 4 * np.pi**2], rtol=2e-3)


def test_square_with_one_dirichlet_side_converges_quadratically():
    errs = []
    for n in (16, 32, 64):
        grid = RectilinearGrid.uniform(0, 1, 0, 1, 1.0 / n)
        op = assemble_masked(grid, SubdomainSpec(np.ones(grid.shape, bool),
                                                 dirichlet_sides=("left",)))
        errs.append(abs(smallest_eigenpairs(op).lambda1 - np.pi**2 / 4))
    assert 3.5 < errs[0] / errs[1] < 4.5 and 3.5 < errs[1] / errs[2] < 4.5


def test_graded_edges_hit_breaks():
    e = graded_edges([0, 0.1, 1], [0.01, 0.3])
    assert 0.1 in e and e[0] == 0 and e[-1] == 1
    assert np.all(np.diff(e) > 0)


def test_concentric_annulus_matches_radial_oracle():
    ann = AnnulusDomain(circle(1.0), circle(2.0))
    errs = []
    for g in ((8, 64), (16, 128), (32, 256)):
        op = assemble_annulus(ann, harmonic_flux(0.5, 1.0), GridSpec(*g, "annulus"))
        errs.append(abs(smallest_eigenpairs(op).lambda1 - CONCENTRIC_1_2_PHI_HALF))
    assert errs[-1] < 1e-5
    assert 3.5 < errs[1] / errs[2] < 4.5


def test_annulus_needs_cells_across():
    ann = AnnulusDomain(circle(1.0), circle(1.5))
    with pytest.raises(ThinDomainUnderresolved):
        assemble_annulus(ann, None, GridSpec(4, 64, "annulus"))


def test_annulus_planar_and_normal_potentials_agree():
    ann = AnnulusDomain(circle(1.0), circle(2.5, center=(0.3, 0.0)))
    g = GridSpec(8, 64, "annulus")
    lam_n = smallest_eigenpairs(assemble_annulus(ann, harmonic_flux(0.4, 1.0), g)).lambda1
    lam_p = smallest_eigenpairs(assemble_annulus(ann, aharonov_bohm(0.4), g,
                                                 potential_chart="planar")).lambda1
    assert_allclose(lam_n, lam_p, rtol=1e-10)


def _random_gauge(rng, period):
    a, b, c = rng.normal(size=3)
    m = int(rng.integers(1, 4))
    return GaugeFunction(lambda x, y: a * np.sin(2 * np.pi * m * y / period + b) * (1 + c * x))


def test_gauge_transform_matches_reassembly_on_cylinder():
    rng = np.random.default_rng(3)
    cyl = MetricCylinder(1.0, 2 * np.pi, lambda r, t: 1 + 0.2 * r * np.sin(t))
    A = harmonic_flux(0.3, 2 * np.pi)
    op = assemble_cylinder(cyl, A, GridSpec(6, 16))
    g = _random_gauge(rng, 2 * np.pi)
    op2 = assemble_cylinder(cyl, A.plus_exact(g), GridSpec(6, 16))
    phi = g(op.points[:, 0], op.points[:, 1])
    assert abs(op.gauge_transform(phi) - op2.stiffness).max() < 1e-13


def test_rayleigh_quotient():
    op = assemble_circle(2 * np.pi, harmonic_flux(0.25, 2 * np.pi), n=128)
    res = smallest_eigenpairs(op)
    assert_allclose(rayleigh_quotient(op, res.eigenvectors[:, 0]), res.lambda1, rtol=1e-12)
    with pytest.raises(ZeroVector):
        rayleigh_quotient(op, np.zeros(op.n))


def test_restriction_raises_first_eigenvalue():
    cyl = MetricCylinder(1.0, 2 * np.pi)
    op = assemble_cylinder(cyl, None, GridSpec(8, 32))
    mask = np.ones(op.raster.shape, bool)
    mask[:, :3] = False
    sub = op.restrict(mask)
    assert sub.n == op.n - 8 * 3
    assert smallest_eigenpairs(sub).lambda1 > smallest_eigenpairs(op).lambda1
    assert sub.bc_labels["Dirichlet"] > 0


def test_masked_dirichlet_faces_towards_complement():
    grid = RectilinearGrid.uniform(0, 2, 0, 1, 0.25)
    omega = np.ones(grid.shape, bool)
    d = omega.copy()
    d[4:, :] = False
    op = assemble_masked(grid, SubdomainSpec(omega, d))
    # half-width strip, Dirichlet on x = 1 only: first value (pi / 2)^2 in the limit
    assert op.n == 16
    assert np.count_nonzero(op.dirichlet) == 4


def test_bad_masks():
    with pytest.raises(BadMask):
        SubdomainSpec(np.zeros((3, 3), bool))
    m = np.zeros((5, 5), bool)
    m[0, 0] = m[4, 4] = True
    with pytest.raises(BadMask):
        SubdomainSpec(m)


def test_euler_characteristic():
    assert euler_characteristic(np.ones((3, 3), bool)) == 1
    ring = np.ones((3, 3), bool)
    ring[1, 1] = False
    assert euler_characteristic(ring) == 0
    assert euler_characteristic(np.ones((3, 6), bool), periodic=True) == 0
    band = np.ones((3, 6), bool)
    band[:, 2] = False
    assert euler_characteristic(band, periodic=True) == 1


def test_nonpositive_metric_rejected():
    with pytest.raises(BadMetricProfile):
        assemble_circle(1.0, theta=lambda t: np.cos(2 * np.pi * t), n=16)


def test_matrix_market_export_round_trip(tmp_path):
    op = assemble_circle(2 * np.pi, harmonic_flux(0.3, 2 * np.pi), n=8)
    op.export_matrix_market(str(tmp_path / "S.mtx"), str(tmp_path / "M.mtx"))
    S = scipy.io.mmread(str(tmp_path / "S.mtx"))
    M = scipy.io.mmread(str(tmp_path / "M.mtx"))
    assert abs(S - op.stiffness).max() == 0
    assert_allclose(M.diagonal(), op.mass, rtol=0, atol=0)
