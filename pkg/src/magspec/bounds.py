"""Closed-form spectral bounds and their numerical verification."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NotSimplyConnected, NotStrictlyStarlike
from .gauge import dist_to_integers
from .geometry import annulus_constants, level_curve_length, normal_coords
from .operators import euler_characteristic, keep_from_raster
from .solver import DEFAULT_TOL, smallest_eigenpairs

FOUR_PI2 = 4.0 * np.pi**2


def lower_bound_cylinder(K, L, phi):
    """``4 pi^2 / (K L^2) * d(phi, Z)^2``."""
    if K < 1.0 - 1e-12 or L <= 0:
        raise ValueError("need K >= 1 and L > 0")
    return FOUR_PI2 / (K * L**2) * dist_to_integers(phi) ** 2


@dataclass(frozen=True)
class AnnulusBound:
    value: float
    convex_value: Optional[float] = None


def lower_bound_annulus(beta, B, m, L, phi, outer_convex=False):
    """``(4 pi^2 / L^2) (beta m / B) d(phi, Z)^2``.

    When the outer curve is convex the weaker, purely metric constant
    ``beta^2 / B^2`` is also returned; ``beta m / B`` always dominates it.
    """
    if m <= 0:
        raise NotStrictlyStarlike("m <= 0")
    if not (0 < beta <= B * (1 + 1e-12)) or L <= 0:
        raise ValueError("need 0 < beta <= B and L > 0")
    d2 = dist_to_integers(phi) ** 2
    value = FOUR_PI2 / L**2 * (beta * m / B) * d2
    convex = None
    if outer_convex:
        convex = FOUR_PI2 / L**2 * (beta / B) ** 2 * d2
        if beta * m / B < (beta / B) ** 2 - 1e-12:
            raise AssertionError("m >= beta/B fails for a convex outer curve")
    return AnnulusBound(value, convex)


@dataclass(frozen=True)
class BoundCheck:
    """Numeric first eigenvalue against a lower bound.

    ``slack`` is the absolute discretization allowance: the Richardson
    estimate ``|lambda_coarse - lambda_fine| / 3`` for a grid halving plus the
    solver tolerance.  ``eps_disc = slack / bound`` is its relative form, so
    the check reads ``lambda >= bound * (1 - eps_disc)``.
    """

    passed: bool
    lambda1: float
    bound: float
    ratio: Optional[float]
    eps_disc: float
    slack: float


def richardson_gap(lambda_coarse, lambda_fine, refinement=2, order=2):
    """Error estimate of the fine value under ``O(h^order)`` convergence."""
    return abs(lambda_coarse - lambda_fine) / (refinement**order - 1)


def check_lower_bound(numeric_lambda1, bound, tol=DEFAULT_TOL, lambda_coarse=None, slack=None):
    """Pass iff ``numeric_lambda1 >= bound - slack``."""
    lam = float(numeric_lambda1)
    bound = float(bound)
    if slack is None:
        slack = 0.0 if lambda_coarse is None else richardson_gap(lambda_coarse, lam)
        slack += tol * max(abs(lam), 1.0)
    eps = slack / bound if bound > 0 else np.inf
    ratio = lam / bound if bound > 0 else None
    return BoundCheck(bool(lam >= bound - slack), lam, bound, ratio, float(eps), float(slack))


@dataclass(frozen=True)
class SubdomainBound:
    nu: np.ndarray
    lambdas: np.ndarray
    passed: bool
    euler: int

    @property
    def nu1(self):
        return float(self.nu[0])


def upper_bound_subdomain(omega_op, d_mask, k=1, omega_spectrum=None, tol=DEFAULT_TOL):
    """``nu_k(D)`` of the zero-potential mixed problem on ``D``.

    ``omega_op`` is the magnetic operator on the whole domain and ``d_mask``
    selects ``D`` on its raster.  ``D`` must be simply connected (raster
    Euler characteristic 1).  The inequality ``lambda_k(Omega, A) <= nu_k(D)``
    is checked against ``omega_spectrum`` (computed if omitted).
    """
    d_mask = np.asarray(d_mask, dtype=bool)
    raster_mask = d_mask if d_mask.shape == omega_op.raster.shape else None
    if raster_mask is None:
        keep = d_mask
        raster_mask = np.zeros(omega_op.raster.shape, dtype=bool)
        sel = omega_op.raster >= 0
        raster_mask[sel] = keep[omega_op.raster[sel]]
    chi = euler_characteristic(raster_mask & (omega_op.raster >= 0), periodic=omega_op.periodic)
    if chi != 1:
        raise NotSimplyConnected(f"subdomain has Euler characteristic {chi}")
    sub = omega_op.restrict(keep_from_raster(omega_op, raster_mask))
    nu = smallest_eigenpairs(sub, k=k, tol=tol).eigenvalues
    if omega_spectrum is None:
        omega_spectrum = smallest_eigenpairs(omega_op, k=k, tol=tol)
    lam = np.asarray(omega_spectrum.eigenvalues[:k])
    slack = 10 * tol * np.maximum(np.abs(nu), 1.0)
    return SubdomainBound(nu, lam, bool(np.all(lam <= nu + slack)), chi)


@dataclass(frozen=True)
class StepsReport:
    """Empirical checks of the three monotonicity facts behind the annulus bound.

    ``step1``: ``Theta / sqrt(Theta^2 + t^2 g^2)`` is non-increasing in ``t``
    along every ray (``g = rho_s / rho``).  ``step2``: the level-curve length
    is non-decreasing in the level.  ``step3``: ``m >= beta / B`` (only
    meaningful for a convex outer curve, else ``None``).  Violations are the
    largest amount by which the claimed monotonicity or inequality fails.
    """

    step1: bool
    step1_violation: float
    step2: bool
    step2_violation: float
    step3: Optional[bool]
    step3_violation: Optional[float]
    level_lengths: np.ndarray

    @property
    def passed(self):
        return self.step1 and self.step2 and self.step3 is not False

    @property
    def worst_violation(self):
        v = [self.step1_violation, self.step2_violation]
        if self.step3_violation is not None:
            v.append(self.step3_violation)
        return max(v)


def verify_steps(ann, n_t=257, n_s=1024, n_levels=101, tol=1e-9):
    c = annulus_constants(ann)
    nc = normal_coords(ann, n_s)
    tau = np.linspace(0.0, 1.0, n_t)
    t = tau[:, None] * nc.rho[None, :]
    Th = nc.Theta(t)
    g = nc.rho_s / nc.rho
    h = Th / np.sqrt(Th**2 + t**2 * g**2)
    v1 = float(max(0.0, np.max(np.diff(h, axis=0))))
    rs = np.linspace(0.0, 1.0, n_levels)
    lengths = np.array([level_curve_length(ann, r, nc) for r in rs])
    v2 = float(max(0.0, np.max(-np.diff(lengths)) / lengths.max()))
    if c.outer_convex:
        v3 = float(max(0.0, c.beta / c.B - c.m))
        s3 = v3 <= tol
    else:
        v3, s3 = None, None
    return StepsReport(v1 <= tol, v1, v2 <= tol, v2, s3, v3, lengths)
