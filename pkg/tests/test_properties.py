import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from magspec.experiments import growing_annulus
from magspec.gauge import GaugeFunction, aharonov_bohm, harmonic_flux
from magspec.geometry import AnnulusDomain, MetricCylinder, circle, ellipse
from magspec.operators import (GridSpec, RectilinearGrid, SubdomainSpec, assemble_annulus,
                               assemble_circle, assemble_cylinder, assemble_masked)
from magspec.solver import smallest_eigenpairs

coef = st.floats(-2.0, 2.0, allow_nan=False)
mode = st.integers(1, 3)
SETTINGS = settings(max_examples=20, deadline=None, derandomize=True)

CYL = MetricCylinder(1.0, 2 * np.pi, lambda r, t: 1 + 0.3 * r * np.sin(t))
ANN = AnnulusDomain(ellipse(1.2, 1.0), circle(2.5, center=(0.2, 0.1)))


def _gauge(a, b, c, m, period):
    k = 2 * np.pi * m / period
    return GaugeFunction(lambda x, y: a * np.sin(k * y + b) * (1 + c * x),
                         lambda x, y: (a * c * np.sin(k * y + b),
                                       a * k * np.cos(k * y + b) * (1 + c * x)))


@SETTINGS
@given(coef, coef, coef, mode)
def test_gauge_invariance_cylinder(a, b, c, m):
    A = harmonic_flux(0.3, 2 * np.pi)
    g = _gauge(a, b, c, m, 2 * np.pi)
    op = assemble_cylinder(CYL, A, GridSpec(6, 16))
    op2 = assemble_cylinder(CYL, A.plus_exact(g), GridSpec(6, 16))
    phi = g(op.points[:, 0], op.points[:, 1])
    assert abs(op.gauge_transform(phi) - op2.stiffness).max() < 1e-13


@SETTINGS
@given(coef, coef, coef, mode)
def test_gauge_invariance_annulus(a, b, c, m):
    A = harmonic_flux(0.4, 1.0)
    g = _gauge(a, b, c, m, 1.0)
    grid = GridSpec(8, 32, "annulus")
    op = assemble_annulus(ANN, A, grid)
    op2 = assemble_annulus(ANN, A.plus_exact(g), grid)
    phi = g(op.points[:, 0], op.points[:, 1])
    assert abs(op.gauge_transform(phi) - op2.stiffness).max() < 1e-13


@SETTINGS
@given(coef, coef, coef, mode)
def test_gauge_invariance_masked_aharonov_bohm(a, b, c, m):
    grid = RectilinearGrid.uniform(-2, 2, -2, 2, 0.25)
    X, Y = grid.centres
    spec = SubdomainSpec(np.hypot(X, Y) > 0.8)
    A = aharonov_bohm(0.35)
    g = _gauge(a, b, c, m, 4.0)
    op = assemble_masked(grid, spec, A)
    op2 = assemble_masked(grid, spec, A.plus_exact(g))
    phi = g(op.points[:, 0], op.points[:, 1])
    assert abs(op.gauge_transform(phi) - op2.stiffness).max() < 1e-13


@settings(max_examples=8, deadline=None, derandomize=True)
@given(st.floats(0.05, 0.95), st.integers(-3, 3))
def test_flux_periodicity_circle(phi, shift):
    L = 2 * np.pi
    a = smallest_eigenpairs(assemble_circle(L, harmonic_flux(phi, L), n=64), k=3).eigenvalues
    b = smallest_eigenpairs(assemble_circle(L, harmonic_flux(phi + shift, L), n=64),
                            k=3).eigenvalues
    c = smallest_eigenpairs(assemble_circle(L, harmonic_flux(-phi, L), n=64), k=3).eigenvalues
    assert_allclose(a, b, atol=1e-9)
    assert_allclose(a, c, atol=1e-9)


@pytest.mark.parametrize("phi", [0.2, 0.5])
def test_flux_periodicity_annulus(phi):
    grid = GridSpec(8, 32, "annulus")
    lam = [smallest_eigenpairs(assemble_annulus(ANN, harmonic_flux(p, 1.0), grid), k=2).eigenvalues
           for p in (phi, phi + 1, phi - 2)]
    assert_allclose(lam[0], lam[1], atol=1e-9)
    assert_allclose(lam[0], lam[2], atol=1e-9)


def _lambda1(kind, phi):
    if kind == "circle":
        op = assemble_circle(2 * np.pi, harmonic_flux(phi, 2 * np.pi), n=64)
    elif kind == "cylinder":
        op = assemble_cylinder(CYL, harmonic_flux(phi, 2 * np.pi), GridSpec(6, 24))
    elif kind == "annulus":
        op = assemble_annulus(ANN, harmonic_flux(phi, 1.0), GridSpec(8, 32, "annulus"))
    else:
        sc = growing_annulus(2.0, phi, cells_per_radius=6)
        op = assemble_masked(sc.grid, SubdomainSpec(sc.omega), aharonov_bohm(phi))
    return smallest_eigenpairs(op).lambda1


ZERO_CASES = [("circle", 0.0), ("circle", 2.0), ("cylinder", 1.0), ("annulus", -1.0),
              ("masked", 1.0), ("masked", 0.0)]
NONZERO_CASES = [("circle", 0.01), ("circle", 1.5), ("cylinder", 0.3), ("annulus", 0.5),
                 ("annulus", 0.98), ("masked", 0.25)]


@pytest.mark.parametrize("kind, phi", ZERO_CASES + NONZERO_CASES)
def test_zero_mode_iff_integer_flux(kind, phi):
    lam = _lambda1(kind, phi)
    assert (abs(lam) < 1e-8) == (phi == round(phi))


def test_repeat_runs_bitwise_equal():
    op = assemble_annulus(ANN, harmonic_flux(0.5, 1.0), GridSpec(8, 32, "annulus"))
    a, b = smallest_eigenpairs(op, k=3), smallest_eigenpairs(op, k=3)
    assert a.eigenvalues.tobytes() == b.eigenvalues.tobytes()
    assert a.eigenvectors.tobytes() == b.eigenvectors.tobytes()
