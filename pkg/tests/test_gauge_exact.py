import numpy as np
import pytest
from numpy.testing import assert_allclose

from magspec.errors import BadMetricProfile, NotClosed, NotClosedLoop
from magspec.exact import (circle_eigenfunction, circle_eigenvalues, product_lambda1,
                           product_spectrum, verify_circle_eigen)
from magspec.gauge import (GaugeFunction, Loop, OneForm, aharonov_bohm, coulomb_gauge_circle,
                           curve_loop, dist_to_integers, flux_on_loop, harmonic_flux, hdt,
                           level_loop, normalized_profile, reduce_to_Hdt)
from magspec.geometry import circle, ellipse

L2PI = 2 * np.pi


@pytest.mark.parametrize("phi, d", [(0.3, 0.3), (0.5, 0.5), (0.7, 0.3), (-1.2, 0.2), (3.0, 0.0)])
def test_dist_to_integers(phi, d):
    assert_allclose(dist_to_integers(phi), d, atol=1e-15)


def test_harmonic_flux_on_level_loop():
    assert_allclose(flux_on_loop(harmonic_flux(0.3, L2PI), level_loop(0.5, L2PI)).phi, 0.3,
                    atol=1e-12)


def test_flux_of_non_constant_H():
    A = hdt(lambda t: 1 + np.cos(t))
    assert_allclose(flux_on_loop(A, level_loop(0.0, L2PI)).phi, 1.0, atol=1e-10)


def test_flux_is_gauge_and_loop_independent():
    A = aharonov_bohm(0.37)
    g = GaugeFunction(lambda x, y: np.sin(x) * y, lambda x, y: (np.cos(x) * y, np.sin(x)))
    for curve in (circle(1.0), ellipse(2.0, 0.5, center=(0.3, 0.1))):
        assert_allclose(flux_on_loop(A.plus_exact(g), curve_loop(curve)).phi, 0.37, atol=1e-8)


def test_open_loop_rejected():
    with pytest.raises(NotClosedLoop):
        flux_on_loop(harmonic_flux(0.3, 1.0), Loop(lambda s: np.stack([s, s], axis=-1)))


def test_non_closed_form_rejected():
    with pytest.raises(NotClosed):
        OneForm(lambda x, y: -y, lambda x, y: x, check_box=(0, 1, 0, 1))


def test_reduce_to_Hdt_removes_exact_part():
    # A = sin t dr + (r cos t + 0.4) dt = d(r sin t) + 0.4 dt
    A = OneForm(lambda r, t: np.sin(t), lambda r, t: r * np.cos(t) + 0.4)
    red = reduce_to_Hdt(A, 1.0, L2PI)
    t = np.linspace(0, L2PI, 9)
    assert_allclose(red.H(t), 0.4, atol=1e-8)
    assert_allclose(red.gauge(0.7 + 0 * t, t), -0.7 * np.sin(t), atol=1e-8)


def test_coulomb_gauge_periodic():
    th = lambda t: 1 + 0.5 * np.sin(t)
    cg = coulomb_gauge_circle(lambda t: np.ones_like(t), th, L2PI)
    assert_allclose(cg.c, 1.0, atol=1e-12)
    assert_allclose(cg.gauge(np.array([0.0, L2PI])), 0.0, atol=1e-10)


def test_normalized_profile_rejects_non_positive():
    with pytest.raises(BadMetricProfile):
        normalized_profile(lambda t: np.cos(t), L2PI)


def test_circle_eigenvalues_values():
    vals = circle_eigenvalues(L2PI, 0.3)
    assert vals[:3] == [(0, pytest.approx(0.09)), (1, pytest.approx(0.49)),
                        (-1, pytest.approx(1.69))]
    half = circle_eigenvalues(L2PI, 0.5)
    assert_allclose([half[0][1], half[1][1]], [0.25, 0.25], atol=1e-15)
    assert {half[0][0], half[1][0]} == {0, 1}


def test_product_spectrum_labels():
    spec = product_spectrum(1.0, L2PI, 0.3, 8)
    assert (spec[0].h, spec[0].k) == (0, 0)
    assert any(e.h == 1 and e.k == 0 and abs(e.value - (np.pi**2 + 0.09)) < 1e-12 for e in spec)
    assert_allclose(product_lambda1(L2PI, 1.7), 0.09, atol=1e-14)


@pytest.mark.parametrize("theta, H, k", [
    (lambda t: np.ones_like(t), lambda t: 0.3 + 0 * t, 0),
    (lambda t: 1 + 0.3 * np.cos(t), lambda t: 0.5 + 0 * t, 1),
    (lambda t: 1 + 0.5 * np.sin(2 * t), lambda t: 0.2 + np.cos(t), -1),
])
def test_circle_eigenfunctions_solve_the_ode(theta, H, k):
    assert verify_circle_eigen(theta, H, L2PI, k) < 1e-4
    u = circle_eigenfunction(theta, H, L2PI, k)
    assert_allclose(abs(u(np.array([0.0, 1.0, 4.0]))), 1.0, atol=1e-12)
    assert_allclose(u(np.array([L2PI])), u(np.array([0.0])), atol=1e-10)


def test_circle_residual_is_second_order():
    th = lambda t: 1 + 0.3 * np.cos(t)
    H = lambda t: 0.5 + 0 * t
    r1 = verify_circle_eigen(th, H, L2PI, 1, n=512)
    r2 = verify_circle_eigen(th, H, L2PI, 1, n=1024)
    assert 3.5 < r1 / r2 < 4.5
