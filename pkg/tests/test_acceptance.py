"""Acceptance suite: one test and one PASS/FAIL line per criterion.

Run ``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
"""

import functools
import sys
import time

import numpy as np
import pytest

from magspec.bounds import verify_steps
from magspec.experiments import (PERTURBATIONS, annulus_rows, cylinder_rows, growing_annulus_rows,
                                 log_cutoff_domain, log_cutoff_oracle, mushroom,
                                 perturbed_cylinder, rect_annulus_rows,
                                 test_function_report as tf_report, thin_annulus_rows)
from magspec.gauge import GaugeFunction, aharonov_bohm, harmonic_flux
from magspec.geometry import AnnulusDomain, MetricCylinder, circle, ellipse, rounded_rectangle
from magspec.operators import (GridSpec, RectilinearGrid, SubdomainSpec, assemble_annulus,
                               assemble_circle, assemble_cylinder, assemble_masked)
from magspec.solver import smallest_eigenpairs

L2PI = 2 * np.pi
# radial shooting oracle for radii 1 and 1.05 at flux 1/2 (solve_ivp, rtol 1e-13)
THIN_005_ORACLE = 0.23800078959093326

ANNULI = {
    "concentric": AnnulusDomain(circle(1.0), circle(2.0)),
    "offset": AnnulusDomain(circle(1.0), circle(3.0, center=(1.0, 0.0))),
    "ellipse_circle": AnnulusDomain(ellipse(1.5, 1.0), circle(3.0)),
    "rounded_rect": AnnulusDomain(rounded_rectangle(-3, 3, 1, 2, 0.05, 1.0),
                                  rounded_rectangle(-4, 4, 0, 4, 0.05, 1.0)),
    "circle_ellipse": AnnulusDomain(circle(1.0), ellipse(3.0, 2.2)),
}
ANNULUS_GRIDS = [(16, 128), (32, 256)]


def _line(name, passed, detail):
    return f"{'PASS' if passed else 'FAIL'} criterion {name}: {detail}"


@pytest.fixture
def report(capsys):
    def emit(name, passed, detail):
        with capsys.disabled():
            sys.stdout.write("\n" + _line(name, passed, detail) + "\n")
        assert passed, detail
    return emit


# ---------------------------------------------------------------- shared runs

@functools.lru_cache(maxsize=None)
def product_refinement():
    t0 = time.perf_counter()
    lam = [smallest_eigenpairs(assemble_cylinder(MetricCylinder(1.0, L2PI),
                                                 harmonic_flux(0.3, L2PI), GridSpec(*g))).lambda1
           for g in ((32, 128), (64, 256), (128, 512))]
    return np.array(lam), time.perf_counter() - t0


@functools.lru_cache(maxsize=None)
def perturbed_rows():
    return {name: cylinder_rows(perturbed_cylinder(name), 0.3, [(32, 128), (64, 256)], name=name)
            for name in PERTURBATIONS}


@functools.lru_cache(maxsize=None)
def annulus_suite():
    return {name: annulus_rows(ann, 0.5, ANNULUS_GRIDS, name=name, slit=True)
            for name, ann in ANNULI.items() if name != "circle_ellipse"}


# ---------------------------------------------------------------- criteria

def check_1():
    t0 = time.perf_counter()
    res = smallest_eigenpairs(assemble_circle(L2PI, harmonic_flux(0.5, L2PI), n=1024), k=2)
    dt = time.perf_counter() - t0
    err = np.abs(res.eigenvalues - 0.25).max()
    return err < 1e-4 and dt < 5, f"max |lambda_i - 0.25| = {err:.2e}, {dt:.2f} s"


def check_2():
    lam, dt = product_refinement()
    err = np.abs(lam - 0.09)
    order = np.log2(err[1] / err[2])
    ok = abs(order - 2.0) <= 0.3 and err[-1] < 5e-4 and dt < 60
    return ok, f"errors {', '.join(f'{e:.2e}' for e in err)}, order {order:.3f}, {dt:.1f} s"


def check_3():
    rows = perturbed_rows()
    bad = [n for n, rs in rows.items() if not all(r["pass_lower"] for r in rs)]
    worst = min(rs[-1]["lambda1"] - rs[-1]["bound"] + rs[-1]["slack"] for rs in rows.values())
    return not bad, f"{len(rows)} cylinders, violations {bad}, min margin {worst:.3e}"


def check_4():
    lam, _ = product_refinement()
    r0 = lam[-1] / 0.09
    big = {n: rs[-1]["ratio"] for n, rs in perturbed_rows().items() if PERTURBATIONS[n][0] >= 0.2}
    ok = 0.998 <= r0 <= 1.01 and len(big) > 0 and min(big.values()) >= 1.02
    return ok, f"product ratio {r0:.5f}, min ratio for A_p >= 0.2 {min(big.values()):.4f}"


def check_5():
    suite = annulus_suite()
    bad = [n for n, rs in suite.items() if not all(r["pass_lower"] for r in rs)]
    conc = suite["concentric"][-1]
    ratios = ", ".join(f"{n} {rs[-1]['ratio']:.3f}" for n, rs in suite.items())
    ok = not bad and np.isclose(conc["bound"], 0.0625, rtol=1e-12)
    return ok, f"concentric lambda_1 {conc['lambda1']:.5f} >= 0.0625; ratios {ratios}"


def check_6():
    reps = {n: verify_steps(a) for n, a in ANNULI.items()}
    worst = max(r.worst_violation for r in reps.values())
    ok = all(r.passed for r in reps.values()) and worst <= 1e-6
    return ok, f"{len(reps)} annuli, worst violation {worst:.2e}"


def check_7():
    suite = annulus_suite()
    slit = {n: (rs[-1]["nu1"], rs[-1]["lambda1"], rs[-1]["pass_upper"]) for n, rs in suite.items()}
    rows = growing_annulus_rows((2.0, 4.0, 8.0), 0.5)
    nu = np.array([r["nu1"] for r in rows])
    slope = np.polyfit(np.log([2.0, 4.0, 8.0]), np.log(nu), 1)[0]
    ok = all(v[2] for v in slit.values()) and all(r["pass_upper"] for r in rows) \
        and np.all(np.diff(nu) < 0) and abs(slope + 2) <= 0.2
    return ok, (f"slit nu_1 >= lambda_1 on {len(slit)} annuli; ball nu_1 {np.round(nu, 4)}, "
                f"log-log slope {slope:.3f}")


def check_8a():
    rows = thin_annulus_rows((0.2, 0.1, 0.05), 0.5)
    fine = [r for r in rows if r["param"] == 0.05][-1]
    L = L2PI * 1.05
    target = 4 * np.pi**2 / L**2 * 0.25
    rel = abs(fine["lambda1"] / target - 1)
    oracle = abs(fine["lambda1"] / THIN_005_ORACLE - 1)
    return rel <= 0.03, (f"eps=0.05 lambda_1 {fine['lambda1']:.5f} vs target {target:.5f} "
                         f"(off {100 * rel:.2f}%, needs 3%); radial oracle agrees to "
                         f"{100 * oracle:.3f}%")


def check_8b():
    eps = np.array([0.2, 0.1, 0.05])
    rows = rect_annulus_rows(tuple(eps), 0.5)
    nu = np.array([r["nu1"] for r in rows])
    lam = np.array([r["lambda1"] for r in rows])
    q = np.array([r["test_quotient"] for r in rows])
    C = np.max(q / eps)
    ok = np.all(lam <= nu) and np.all(np.diff(nu) < 0) and np.all(nu <= C * eps)
    return ok, f"nu_1 {np.round(nu, 5)}, lambda_1 {np.round(lam, 5)}, nu_1/eps <= {C:.4f}"


def check_8c():
    out = []
    for delta in (0.3, 0.2):
        sc = mushroom(delta)
        q = tf_report(sc, solve=False).quotient
        out.append((delta, q, sc.info["claim"]))
    ok = all(q <= c for _, q, c in out)
    return ok, ", ".join(f"delta {d}: R(u) {q:.4f} <= {c:.4f}" for d, q, c in out)


def check_8d():
    b = 0.01
    e = tf_report(log_cutoff_domain(b), solve=False).energy
    o = log_cutoff_oracle(b)
    rel = abs(e / o - 1)
    return rel <= 0.05, f"b={b}: energy {e:.5f} vs radial oracle {o:.5f} ({100 * rel:.2f}%)"


def _gauge(rng, period):
    a, b, c = rng.normal(size=3)
    k = 2 * np.pi * int(rng.integers(1, 4)) / period
    return GaugeFunction(lambda x, y: a * np.sin(k * y + b) * (1 + c * x),
                         lambda x, y: (a * c * np.sin(k * y + b),
                                       a * k * np.cos(k * y + b) * (1 + c * x)))


def check_9():
    rng = np.random.default_rng(7)
    cyl = MetricCylinder(1.0, L2PI, lambda r, t: 1 + 0.3 * r * np.sin(t))
    ann = ANNULI["ellipse_circle"]
    grid = RectilinearGrid.uniform(-2, 2, -2, 2, 0.25)
    X, Y = grid.centres
    spec = SubdomainSpec(np.hypot(X, Y) > 0.8)
    builders = [
        (lambda A: assemble_cylinder(cyl, A, GridSpec(6, 16)), harmonic_flux(0.3, L2PI), L2PI),
        (lambda A: assemble_annulus(ann, A, GridSpec(8, 32, "annulus")), harmonic_flux(0.4, 1.0), 1.0),
        (lambda A: assemble_masked(grid, spec, A), aharonov_bohm(0.35), 4.0),
    ]
    gauge_err = 0.0
    for i in range(20):
        build, A, period = builders[i % 3]
        g = _gauge(rng, period)
        op = build(A)
        phi = g(op.points[:, 0], op.points[:, 1])
        gauge_err = max(gauge_err, abs(op.gauge_transform(phi) - build(A.plus_exact(g)).stiffness).max())

    def lam(phi, k=1):
        return smallest_eigenpairs(assemble_annulus(ann, harmonic_flux(phi, 1.0),
                                                    GridSpec(8, 32, "annulus")), k=k).eigenvalues

    period_err = max(np.abs(lam(p, 2) - lam(p + s, 2)).max() for p, s in ((0.3, 1), (0.5, -2)))
    cases = [(kind, p) for kind in ("circle", "cylinder", "annulus")
             for p in (0.0, 1.0, -2.0, 0.5)]
    zero_ok = True
    for kind, p in cases:
        if kind == "circle":
            op = assemble_circle(L2PI, harmonic_flux(p, L2PI), n=64)
        elif kind == "cylinder":
            op = assemble_cylinder(cyl, harmonic_flux(p, L2PI), GridSpec(6, 24))
        else:
            op = assemble_annulus(ann, harmonic_flux(p, 1.0), GridSpec(8, 32, "annulus"))
        zero_ok &= (abs(smallest_eigenpairs(op).lambda1) < 1e-8) == (p == round(p))
    det = lam(0.5, 3).tobytes() == lam(0.5, 3).tobytes()
    ok = gauge_err < 1e-13 and period_err < 1e-9 and zero_ok and det
    return ok, (f"gauge max entry error {gauge_err:.1e} over 20 gauges, flux period error "
                f"{period_err:.1e}, zero-mode iff integer on {len(cases)} cases: {zero_ok}, "
                f"bitwise repeat: {det}")


CRITERIA = {"1": check_1, "2": check_2, "3": check_3, "4": check_4, "5": check_5, "6": check_6,
            "7": check_7, "8a": check_8a, "8b": check_8b, "8c": check_8c, "8d": check_8d,
            "9": check_9}


@pytest.mark.parametrize("name", list(CRITERIA))
def test_criterion(name, report):
    report(name, *CRITERIA[name]())


if __name__ == "__main__":
    results = []
    for name, fn in CRITERIA.items():
        ok, detail = fn()
        print(_line(name, ok, detail), flush=True)
        results.append(ok)
    sys.exit(0 if all(results) else 1)
