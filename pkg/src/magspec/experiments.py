"""Scenario runners: bound checks, subdomain upper bounds and sharpness families.

Each runner returns a list of row dicts keyed by :data:`COLUMNS`; missing
entries are written as empty CSV fields.
"""

import time
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .bounds import (check_lower_bound, lower_bound_annulus, lower_bound_cylinder,
                     richardson_gap, upper_bound_subdomain)
from .errors import ThinDomainUnderresolved
from .gauge import aharonov_bohm, dist_to_integers, harmonic_flux
from .geometry import (AnnulusDomain, MetricCylinder, annulus_constants, circle, cylinder_K,
                       foliation_K_annulus,
                       rounded_rectangle)
from .operators import (GridSpec, RectilinearGrid, SubdomainSpec, assemble_annulus,
                        assemble_circle, assemble_cylinder, assemble_masked, graded_edges)
from .solver import DEFAULT_TOL, smallest_eigenpairs

COLUMNS = ["scenario", "param", "phi", "resolution", "n_dof", "K", "L", "beta", "B", "m",
           "bound", "lambda1", "slack", "ratio", "nu1", "test_quotient", "pass_lower",
           "pass_upper", "iterations", "residual", "wall_time"]

MIN_NECK_CELLS = 8


def _profile(A, f):
    return lambda r, t: 1.0 + A * f(r, t)


# name -> (A_p, f) with theta = 1 + A_p f(r, t).  The first five have zero mean on
# every level circle; the last five change the level lengths.
PERTURBATIONS = {
    "t_only": (0.1, lambda r, t: np.sin(t)),
    "small": (0.05, lambda r, t: r * np.cos(t)),
    "r_sin": (0.15, lambda r, t: r * np.sin(t)),
    "shear": (0.15, lambda r, t: np.sin(t + 2 * r)),
    "r2_sin2": (0.1, lambda r, t: r**2 * np.sin(2 * t)),
    "radial": (0.2, lambda r, t: np.sin(np.pi * r / 2)),
    "radial_mix": (0.3, lambda r, t: np.sin(np.pi * r / 2) * (1 + 0.5 * np.sin(t))),
    "bump": (0.25, lambda r, t: np.sin(np.pi * r)),
    "bump_wave": (0.4, lambda r, t: np.sin(np.pi * r) * (1 + 0.5 * np.sin(2 * t))),
    "radial_shear": (0.4, lambda r, t: np.sin(np.pi * r / 2) * (1 + 0.5 * np.sin(t + r))),
}


def perturbed_cylinder(name, amplitude=None, a=1.0, L=2 * np.pi):
    """Cylinder with profile ``1 + A_p f(r, t)`` from :data:`PERTURBATIONS`."""
    A, f = PERTURBATIONS[name]
    return MetricCylinder(a, L, _profile(A if amplitude is None else amplitude, f))


def _row(**kw):
    row = {c: None for c in COLUMNS}
    unknown = set(kw) - set(COLUMNS)
    if unknown:
        raise KeyError(f"unknown columns {sorted(unknown)}")
    row.update(kw)
    return row


def _solve_row(op, tol, **kw):
    t0 = time.perf_counter()
    res = smallest_eigenpairs(op, k=1, tol=tol)
    return res, dict(lambda1=res.lambda1, n_dof=op.n, iterations=res.iterations,
                     residual=float(res.residuals[0]), wall_time=time.perf_counter() - t0, **kw)


def _finish_refinement(rows, bound):
    """Attach Richardson slack and the lower-bound verdict to refinement rows.

    Each row's error is estimated against its coarser neighbour; the coarsest
    row uses the next finer one (its error is ``4/3`` of the gap at order 2).
    """
    prev = None
    for row in rows:
        slack = None
        if prev is None and len(rows) > 1:
            lam = row["lambda1"]
            slack = 4.0 * richardson_gap(lam, rows[1]["lambda1"]) + DEFAULT_TOL * max(abs(lam), 1.0)
        check = check_lower_bound(row["lambda1"], bound, DEFAULT_TOL,
                                  lambda_coarse=None if prev is None else prev, slack=slack)
        row.update(bound=bound, slack=check.slack, ratio=check.ratio,
                   pass_lower=check.passed)
        prev = row["lambda1"]
    return rows


# ---------------------------------------------------------------- cylinders

def cylinder_rows(cyl, phi, resolutions, tol=DEFAULT_TOL, name="cylinder", param=None):
    """Refinement study of ``lambda_1`` on a metric cylinder against the
    cylinder lower bound.  The flux enters as the harmonic potential."""
    fc = cylinder_K(cyl)
    bound = lower_bound_cylinder(fc.K, fc.L, phi)
    A = harmonic_flux(phi, cyl.L_ref)
    rows = []
    for n_r, n_t in resolutions:
        op = assemble_cylinder(cyl, A, GridSpec(n_r, n_t))
        _, data = _solve_row(op, tol)
        rows.append(_row(scenario=name, param=param, phi=phi, resolution=f"{n_r}x{n_t}",
                         K=fc.K, L=fc.L, **data))
    return _finish_refinement(rows, bound)


def circle_rows(L, phi, n, tol=DEFAULT_TOL, modes=2):
    op = assemble_circle(L, harmonic_flux(phi, L), n=n)
    res = smallest_eigenpairs(op, k=modes, tol=tol)
    bound = lower_bound_cylinder(1.0, L, phi)
    return [_row(scenario="circle", param=f"mode{i + 1}", phi=phi, resolution=str(n),
                 n_dof=op.n, K=1.0, L=L, bound=bound, lambda1=float(v),
                 ratio=float(v) / bound if bound > 0 else None,
                 iterations=res.iterations, residual=float(r), wall_time=res.wall_time)
            for i, (v, r) in enumerate(zip(res.eigenvalues, res.residuals))]


# ---------------------------------------------------------------- annuli in normal coordinates

def annulus_bound(ann, phi):
    c = annulus_constants(ann)
    b = lower_bound_annulus(c.beta, c.B, c.m, c.L, phi, c.outer_convex)
    return c, b.value


def slit_mask(op, column=0, delta=2):
    """Raster mask of ``Omega`` minus a radial slit: ``1 + 2 delta`` full columns."""
    n_cols = op.raster.shape[1]
    cols = (column + np.arange(-delta, delta + 1)) % n_cols
    mask = op.raster >= 0
    mask[:, cols] = False
    return mask


def annulus_rows(ann, phi, resolutions, tol=DEFAULT_TOL, name="annulus", param=None,
                 slit=False, potential="harmonic"):
    """Refinement study on a starlike annulus; with ``slit`` the subdomain
    bound of the slit annulus is added on the finest grid.

    ``potential="aharonov_bohm"`` puts the pole at the centroid of the inner
    curve instead of using the harmonic form ``2 pi phi du``.
    """
    c, bound = annulus_bound(ann, phi)
    K = foliation_K_annulus(ann, constants=c).K
    if potential == "aharonov_bohm":
        A, chart = aharonov_bohm(phi, tuple(ann.sigma1.polygon().mean(axis=0))), "planar"
    else:
        A, chart = harmonic_flux(phi, 1.0), "normal"
    rows = []
    res = op = None
    for n_r, n_t in resolutions:
        op = assemble_annulus(ann, A, GridSpec(n_r, n_t, "annulus"), potential_chart=chart,
                              constants=c)
        res, data = _solve_row(op, tol)
        rows.append(_row(scenario=name, param=param, phi=phi, resolution=f"{n_r}x{n_t}",
                         K=K, L=c.L, beta=c.beta, B=c.B, m=c.m, **data))
    _finish_refinement(rows, bound)
    if slit:
        ub = upper_bound_subdomain(op, slit_mask(op), k=1, omega_spectrum=res, tol=tol)
        rows[-1].update(nu1=ub.nu1, pass_upper=ub.passed)
    return rows


def thin_annulus_rows(eps_list=(0.2, 0.1, 0.05), phi=0.5, n_across=(8, 16), n_around=(256, 512),
                      tol=DEFAULT_TOL):
    """Concentric circles of radii 1 and ``1 + eps``; ``ratio`` is
    ``lambda_1 / ((4 pi^2 / L^2) d^2)`` with ``L`` the outer length."""
    rows = []
    for eps in eps_list:
        ann = AnnulusDomain(circle(1.0), circle(1.0 + eps))
        rows += annulus_rows(ann, phi, list(zip(n_across, n_around)), tol,
                             name="thin_annulus", param=eps)
    return rows


# ---------------------------------------------------------------- masked planar scenarios

@dataclass
class MaskedScenario:
    """A masked planar domain with its subdomain and an explicit test function."""

    grid: RectilinearGrid
    omega: np.ndarray
    d_mask: np.ndarray
    potential: object
    test_function: object = None
    bound: float = None
    info: dict = None


def _quadratic_parts(sub, f):
    f = np.asarray(f, dtype=complex)
    energy = float(np.real(np.vdot(f, sub.stiffness @ f)))
    mass = float(np.real(np.vdot(f, sub.mass * f)))
    return energy, mass


def growing_annulus(R, phi=0.5, cells_per_radius=24):
    """Concentric circles of radii 1 and ``R + 1`` on a square grid with
    ``h = R / (2 cells_per_radius)``; ``D`` is the ball ``B(x, R/2)`` with
    ``|x| = 1 + R/2``, centred on a grid vertex."""
    h = R / (2.0 * cells_per_radius)
    ro = R + 1.0
    n = int(round(2 * ro / h))
    edges = -ro + h * np.arange(n + 1)
    grid = RectilinearGrid(edges, edges.copy())
    X, Y = grid.centres
    rr = np.hypot(X, Y)
    omega = (rr >= 1.0) & (rr <= ro)
    xc = np.array([1.0 + R / 2.0, 0.0])
    d = np.hypot(X - xc[0], Y - xc[1]) < R / 2.0
    bound = lower_bound_annulus(R, R, 1.0, 2 * np.pi * ro, phi).value
    return MaskedScenario(grid, omega, d, aharonov_bohm(phi), bound=bound,
                          info={"R": R, "h": h, "beta": R, "B": R, "m": 1.0, "L": 2 * np.pi * ro})


def rect_annulus(eps, phi=0.5, h=0.1, gap_cells=8):
    """Outer ``[-4,4] x [0,4]`` minus inner ``[-3,3] x [eps,2]``.

    ``D`` removes ``[-1,1] x [0,eps]`` from the gap; the test function is 1
    outside ``[-2,2] x [0,eps]`` and ``|x| - 1`` inside the gap for
    ``1 <= |x| <= 2``.
    """
    xe = graded_edges([-4, -3, -2, -1, 1, 2, 3, 4], [h] * 7)
    ye = graded_edges([0, eps, 2, 4], [eps / gap_cells, h, h])
    grid = RectilinearGrid(xe, ye)
    X, Y = grid.centres
    hole = (np.abs(X) < 3) & (Y > eps) & (Y < 2)
    omega = ~hole
    d = omega & ~((np.abs(X) < 1) & (Y < eps))

    def f(x, y):
        out = np.ones_like(x)
        gap = (y < eps) & (np.abs(x) < 2)
        out[gap] = np.abs(x[gap]) - 1.0
        return out

    return MaskedScenario(grid, omega, d, aharonov_bohm(phi, (0.0, 1.0 + eps / 2)),
                          test_function=f, info={"eps": eps, "h": h, "energy_claim": 2 * eps})


def mushroom(delta, eps=None, phi=0.5, h=0.1, neck_cells=8):
    """Rectangle annulus (outer ``[-4,4] x [0,4]``, inner ``[-3,3] x [1,2]``)
    with a mushroom on the top side: a neck ``[-eps/2, eps/2] x [4, 4+delta]``
    under a cap ``[-delta/2, delta/2] x [4+delta, 4+2 delta]``.  ``D`` is the
    mushroom, Dirichlet at the base of the neck.  Default ``eps = delta^4``.
    """
    eps = delta**4 if eps is None else eps
    if eps / (eps / neck_cells) < MIN_NECK_CELLS:
        raise ThinDomainUnderresolved("neck must span at least 8 cells")
    hx_neck = eps / neck_cells
    hc = min(h, delta / 16)
    xe = graded_edges([-4, -3, -delta / 2, -eps / 2, eps / 2, delta / 2, 3, 4],
                      [h, h, hc, hx_neck, hc, h, h])
    ye = graded_edges([0, 1, 2, 4, 4 + delta, 4 + 2 * delta], [h, h, h, hc, hc])
    grid = RectilinearGrid(xe, ye)
    X, Y = grid.centres
    base = (Y < 4) & ~((np.abs(X) < 3) & (Y > 1) & (Y < 2))
    neck = (np.abs(X) < eps / 2) & (Y > 4) & (Y < 4 + delta)
    cap = (np.abs(X) < delta / 2) & (Y > 4 + delta) & (Y < 4 + 2 * delta)
    omega = base | neck | cap
    d = neck | cap
    if np.count_nonzero(neck[:, np.argmax(neck.any(axis=0))]) < MIN_NECK_CELLS:
        raise ThinDomainUnderresolved("neck must span at least 8 cells")

    def f(x, y):
        return np.clip((y - 4.0) / delta, 0.0, 1.0)

    return MaskedScenario(grid, omega, d, aharonov_bohm(phi, (0.0, 1.5)), test_function=f,
                          info={"delta": delta, "eps": eps, "claim": eps / delta**3})


def log_cutoff_domain(b, phi=0.5, h=0.1, fine_cells=16):
    """Outer ``[-4,4] x [0,4]`` minus the unit disk centred at ``(0, 1 + b/2)``.

    The boundary components are ``b/2`` apart near ``x = (0, 0)``; ``D``
    removes ``B(x, b)`` and the test function is the log cutoff between
    radii ``b`` and ``sqrt(b)``.
    """
    beta = b / 2.0
    sb = np.sqrt(b)
    w = 1.25 * sb
    hf = b / fine_cells
    xe = graded_edges([-4, -w, w, 4], [h, hf, h])
    ye = graded_edges([0, w, 4], [hf, h])
    grid = RectilinearGrid(xe, ye)
    X, Y = grid.centres
    omega = np.hypot(X, Y - (1.0 + beta)) > 1.0
    d = omega & (np.hypot(X, Y) >= b)

    def f(x, y):
        return log_cutoff_profile(np.hypot(x, y), b)

    return MaskedScenario(grid, omega, d, aharonov_bohm(phi, (0.0, 1.0 + beta)), test_function=f,
                          info={"b": b, "beta": beta})


def log_cutoff_profile(r, b):
    r = np.asarray(r, dtype=float)
    out = np.clip(-2.0 / np.log(b) * (np.log(np.maximum(r, b)) - np.log(b)), 0.0, 1.0)
    return out


def log_cutoff_oracle(b):
    """``int_b^sqrt(b) F'(r)^2 ell(r) dr`` with ``ell(r)`` the length of the
    half circle of radius ``r`` about the origin outside the unit disk centred
    at ``(0, 1 + b/2)``."""
    cy = 1.0 + b / 2.0

    def ell(r):
        s = (r * r + cy * cy - 1.0) / (2.0 * r * cy)
        return 2.0 * r * np.arcsin(min(s, 1.0))

    c = -2.0 / np.log(b)
    val, _ = quad(lambda r: (c / r) ** 2 * ell(r), b, np.sqrt(b), limit=200)
    return val


@dataclass(frozen=True)
class TestFunctionReport:
    quotient: float
    energy: float
    mass: float
    nu1: float = None
    lambda1: float = None


def _masked_ops(sc):
    spec = SubdomainSpec(sc.omega)
    op = assemble_masked(sc.grid, spec, sc.potential)
    return op


def test_function_report(sc, solve=True, tol=DEFAULT_TOL):
    """Rayleigh quotient of the scenario's test function on the mixed problem
    for ``D``; with ``solve`` also ``nu_1(D)`` and ``lambda_1(Omega, A)``.

    The quotient must dominate ``nu_1(D)``, which must dominate
    ``lambda_1(Omega, A)``.
    """
    op = _masked_ops(sc)
    sub = op.restrict(sc.d_mask)
    X, Y = sc.grid.centres
    f = sc.test_function(X[sc.d_mask], Y[sc.d_mask])
    energy, mass = _quadratic_parts(sub, f)
    q = energy / mass
    nu1 = lam1 = None
    if solve:
        ub = upper_bound_subdomain(op, sc.d_mask, k=1, tol=tol)
        nu1, lam1 = ub.nu1, float(ub.lambdas[0])
        if nu1 > q * (1 + 1e-9) + tol:
            raise AssertionError("test-function quotient below the mixed eigenvalue")
        if not ub.passed:
            raise AssertionError("lambda_1(Omega, A) exceeds nu_1(D)")
    return TestFunctionReport(q, energy, mass, nu1, lam1)


def test_function_rayleigh(scenario, params=None):
    """Rayleigh quotient of the explicit test function of a sharpness example.

    ``scenario`` is ``"rect_annulus"`` (``eps``), ``"mushroom"``
    (``delta``, optional ``eps``) or ``"log_cutoff"`` (``b``).
    """
    params = dict(params or {})
    builders = {"rect_annulus": rect_annulus, "mushroom": mushroom,
                "log_cutoff": log_cutoff_domain}
    if scenario not in builders:
        raise KeyError(f"unknown scenario {scenario!r}")
    solve = params.pop("solve", scenario != "log_cutoff")
    sc = builders[scenario](**params)
    return test_function_report(sc, solve=solve).quotient


def masked_rows(sc, name, param, phi, tol=DEFAULT_TOL, with_test_function=True):
    t0 = time.perf_counter()
    op = _masked_ops(sc)
    res = smallest_eigenpairs(op, k=1, tol=tol)
    ub = upper_bound_subdomain(op, sc.d_mask, k=1, omega_spectrum=res, tol=tol)
    q = None
    if with_test_function and sc.test_function is not None:
        q = test_function_report(sc, solve=False).quotient
    info = sc.info or {}
    row = _row(scenario=name, param=param, phi=phi, resolution=str(sc.grid.shape),
               n_dof=op.n, beta=info.get("beta"), B=info.get("B"), m=info.get("m"),
               L=info.get("L"), lambda1=res.lambda1, nu1=ub.nu1, test_quotient=q,
               pass_upper=ub.passed and (q is None or ub.nu1 <= q * (1 + 1e-9) + tol),
               iterations=res.iterations, residual=float(res.residuals[0]),
               wall_time=time.perf_counter() - t0)
    if sc.bound is not None:
        check = check_lower_bound(res.lambda1, sc.bound, tol)
        row.update(bound=sc.bound, ratio=check.ratio, slack=check.slack,
                   pass_lower=check.passed)
    return row


def growing_annulus_rows(R_list=(2.0, 4.0, 8.0), phi=0.5, cells_per_radius=24, tol=DEFAULT_TOL):
    return [masked_rows(growing_annulus(R, phi, cells_per_radius), "growing_annulus", R, phi, tol)
            for R in R_list]


def rect_annulus_rows(eps_list=(0.2, 0.1, 0.05), phi=0.5, h=0.1, tol=DEFAULT_TOL):
    rows = []
    for eps in eps_list:
        row = masked_rows(rect_annulus(eps, phi, h), "rect_annulus", eps, phi, tol)
        ann = AnnulusDomain(rounded_rectangle(-3, 3, eps, 2, min(0.05, eps / 2), 1.0),
                            rounded_rectangle(-4, 4, 0, 4, 0.05, 1.0))
        c, bound = annulus_bound(ann, phi)
        check = check_lower_bound(row["lambda1"], bound, tol)
        row.update(beta=c.beta, B=c.B, m=c.m, L=c.L, bound=bound, ratio=check.ratio,
                   slack=check.slack, pass_lower=check.passed)
        rows.append(row)
    return rows


def mushroom_rows(delta_list=(0.3, 0.2), phi=0.5, h=0.1, tol=DEFAULT_TOL):
    rows = []
    for delta in delta_list:
        sc = mushroom(delta, phi=phi, h=h)
        row = masked_rows(sc, "mushroom", delta, phi, tol)
        row["pass_upper"] = bool(row["pass_upper"] and row["test_quotient"] <= sc.info["claim"])
        rows.append(row)
    return rows


def log_cutoff_rows(b_list=(0.01,), phi=0.5, tol=DEFAULT_TOL):
    rows = []
    for b in b_list:
        t0 = time.perf_counter()
        sc = log_cutoff_domain(b, phi)
        rep = test_function_report(sc, solve=False)
        rows.append(_row(scenario="log_cutoff", param=b, phi=phi, resolution=str(sc.grid.shape),
                         test_quotient=rep.quotient, nu1=None,
                         wall_time=time.perf_counter() - t0))
    return rows


# ---------------------------------------------------------------- flux sweep

def flux_sweep(cyl, phis=None, grid=GridSpec(32, 128), tol=DEFAULT_TOL):
    """``(phi, lambda_1, bound)`` rows over ``phi`` (default 21 values in [0, 1])."""
    phis = np.linspace(0.0, 1.0, 21) if phis is None else np.asarray(phis, dtype=float)
    fc = cylinder_K(cyl)
    rows = []
    for phi in phis:
        op = assemble_cylinder(cyl, harmonic_flux(phi, cyl.L_ref), grid)
        res = smallest_eigenpairs(op, k=1, tol=tol)
        bound = lower_bound_cylinder(fc.K, fc.L, phi)
        rows.append(_row(scenario="flux_sweep", param=float(phi), phi=float(phi),
                         resolution=f"{grid.n_r}x{grid.n_t}", n_dof=op.n, K=fc.K, L=fc.L,
                         bound=bound, lambda1=res.lambda1,
                         ratio=res.lambda1 / bound if bound > 0 else None,
                         pass_lower=bool(res.lambda1 >= bound * (1 - 1e-3) - tol),
                         iterations=res.iterations, residual=float(res.residuals[0]),
                         wall_time=res.wall_time))
    return rows


def product_cylinder(a=1.0, L=2 * np.pi):
    return MetricCylinder(a, L)


def exact_d2(phi):
    return dist_to_integers(phi) ** 2
