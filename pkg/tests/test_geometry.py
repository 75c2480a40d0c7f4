import numpy as np
import pytest
from numpy.testing import assert_allclose

from magspec.errors import BadMetricProfile, InvalidAnnulus, NonRegularCurve, NotStarlike
from magspec.geometry import (AnnulusDomain, ClosedCurve, MetricCylinder, annulus_constants,
                              circle, curvature_at, curve_length, cylinder_K, ellipse,
                              foliation_K_annulus, grad_psi_sq, level_curve_length,
                              mushroom_rectangle, normal_coords, ray_map, rounded_rectangle,
                              spline_curve, starlike_check)

# 8 E(3/4) from scipy.special.ellipe
ELLIPSE_2_1_LENGTH = 9.688448220547675


def test_circle_length_and_curvature():
    c = circle(2.0)
    assert_allclose(curve_length(c), 4 * np.pi, rtol=1e-12)
    assert_allclose(curvature_at(c, np.linspace(0, 1, 7)), 0.5, rtol=1e-12)


def test_ellipse_length_and_curvature():
    e = ellipse(2.0, 1.0)
    assert_allclose(curve_length(e), ELLIPSE_2_1_LENGTH, rtol=1e-10)
    assert_allclose(curvature_at(e, 0.0), 2.0, rtol=1e-10)
    assert_allclose(curvature_at(e, 0.25), 0.25, rtol=1e-10)


def test_clockwise_input_is_reoriented():
    cw = ClosedCurve(lambda u: np.c_[np.cos(-2 * np.pi * u), np.sin(-2 * np.pi * u)])
    assert cw.signed_area() > 0
    assert_allclose(cw.curvature(np.array([0.1, 0.6])), 1.0, rtol=1e-6)


def test_outward_normal_points_away_from_centre():
    c = circle(1.0, center=(3.0, -1.0))
    u = np.linspace(0, 1, 9, endpoint=False)
    assert_allclose(c.normal(u), c.position(u) - np.array([3.0, -1.0]), atol=1e-12)


def test_non_periodic_curve_rejected():
    with pytest.raises(NonRegularCurve):
        ClosedCurve(lambda u: np.c_[u, u**2])


def test_spline_curve_approximates_circle():
    t = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    s = spline_curve(np.c_[np.cos(t), np.sin(t)])
    assert_allclose(curve_length(s), 2 * np.pi, rtol=1e-5)


def test_rounded_rectangle_length():
    r = rounded_rectangle(-1, 1, -1, 1, corner_radius=0.1)
    assert_allclose(curve_length(r), 8 - 8 * 0.1 + 2 * np.pi * 0.1, rtol=1e-12)
    assert r.is_convex()


def test_metric_cylinder_validation():
    with pytest.raises(BadMetricProfile):
        MetricCylinder(1.0, 2 * np.pi, lambda r, t: 1 - 2 * np.cos(t))
    with pytest.raises(BadMetricProfile):
        MetricCylinder(1.0, 2 * np.pi, lambda r, t: 1 + 0.1 * t)


def test_cylinder_K_product_and_level_length():
    cyl = MetricCylinder(1.0, 2 * np.pi, lambda r, t: 1 + 0.2 * np.sin(np.pi * r / 2))
    fc = cylinder_K(cyl)
    assert fc.K == 1.0
    assert_allclose(fc.L, 2 * np.pi * 1.2, rtol=1e-10)


def test_cylinder_K_with_alpha():
    cyl = MetricCylinder(1.0, 2 * np.pi, alpha=lambda r, t: 1 + 0.5 * r)
    assert_allclose(cylinder_K(cyl).K, 1.5, rtol=1e-12)


# analytic: inner circle r=1 at the origin, outer r=3 centred at (1, 0)
@pytest.fixture(scope="module")
def offset():
    return AnnulusDomain(circle(1.0), circle(3.0, center=(1.0, 0.0)))


def test_ray_map_offset_circles(offset):
    hits = ray_map(offset, np.array([0.5, 0.25]))
    assert_allclose(hits.Q[0], [-2.0, 0.0], atol=1e-10)
    assert_allclose(hits.r, [1.0, 2 * np.sqrt(2) - 1], atol=1e-10)
    assert_allclose(hits.cos_theta, [1.0, 2 * np.sqrt(2) / 3], atol=1e-10)


def test_annulus_constants_offset(offset):
    c = annulus_constants(offset)
    assert_allclose([c.beta, c.B, c.m], [1.0, 3.0, 2 * np.sqrt(2) / 3], atol=1e-8)
    assert_allclose(c.L, 6 * np.pi, rtol=1e-12)
    assert c.outer_convex


def test_foliation_K_within_a_priori_bound(offset):
    fc = foliation_K_annulus(offset)
    assert 1.0 <= fc.K <= fc.K_bound
    assert_allclose(fc.K_bound, 9 / (2 * np.sqrt(2)), rtol=1e-8)


def test_grad_psi_matches_finite_differences(offset):
    nc = normal_coords(offset, 256)
    j = 37
    t = 0.4 * nc.rho[j]
    rho_fd = (np.roll(nc.rho, -1) - np.roll(nc.rho, 1)) / (2 / 256)
    assert_allclose(nc.rho_u[j], rho_fd[j], rtol=1e-3)
    val = grad_psi_sq(nc, t, j)
    assert 1 / 9 - 1e-12 <= val <= 1 / (1 * 2 * np.sqrt(2) / 3) ** 2 + 1e-12


def test_level_lengths_interpolate_boundary_lengths(offset):
    assert_allclose(level_curve_length(offset, 0.0), 2 * np.pi, rtol=1e-10)
    assert_allclose(level_curve_length(offset, 1.0), 6 * np.pi, rtol=1e-6)


def test_inner_curve_must_be_inside():
    with pytest.raises(InvalidAnnulus):
        AnnulusDomain(circle(1.0, center=(5.0, 0.0)), circle(2.0))


def test_mushroom_is_not_starlike():
    inner = rounded_rectangle(-3, 3, 1, 2, 0.05, 1.0)
    ann = AnnulusDomain(inner, mushroom_rectangle(0.5, 0.1))
    assert not starlike_check(ann).is_starlike
    with pytest.raises(NotStarlike):
        annulus_constants(ann)
