"""Command line interface: ``magspec spectrum|solve|sweep|verify-steps``."""

import argparse
import os
import sys

import numpy as np

from .config import load_config, parse_curve
from .errors import ConfigError, MagspecError
from .exact import circle_eigenvalues, product_spectrum
from .geometry import AnnulusDomain
from .bounds import verify_steps
from .gauge import harmonic_flux
from .operators import assemble_circle
from .report import format_value, gnuplot_script, write_csv
from .runner import run_scenario, sweep
from .solver import smallest_eigenpairs


def _emit(report, path):
    if path:
        write_csv(report.rows, path, report.metadata)
    else:
        write_csv(report.rows, sys.stdout, report.metadata)


def cmd_spectrum(args):
    out = sys.stdout
    if args.domain == "circle":
        exact = circle_eigenvalues(args.length, args.flux, -args.modes - 2, args.modes + 2)[:args.modes]
        num = smallest_eigenpairs(assemble_circle(args.length, harmonic_flux(args.flux, args.length),
                                                  n=args.n), k=args.modes).eigenvalues
        out.write("mode,k,exact,numeric\n")
        for i, ((k, lam), v) in enumerate(zip(exact, num), start=1):
            out.write(f"{i},{k},{format_value(lam)},{format_value(float(v))}\n")
    else:
        out.write("mode,h,k,exact\n")
        for i, e in enumerate(product_spectrum(args.a, args.length, args.flux, args.modes), start=1):
            out.write(f"{i},{e.h},{e.k},{format_value(e.value)}\n")
    return 0


def cmd_solve(args):
    cfg = load_config(args.config)
    report = run_scenario(cfg)
    _emit(report, args.output or cfg.output)
    return 0 if report.passed else 1


def cmd_sweep(args):
    cfg = load_config(args.config)
    report = sweep(cfg, args.param, args.start, args.stop, args.steps)
    path = args.output or cfg.output
    _emit(report, path)
    if path:
        with open(os.path.splitext(path)[0] + ".gp", "w", encoding="utf-8") as fh:
            fh.write(gnuplot_script(path, x="param", title=f"{cfg.scenario} flux sweep"))
    return 0 if report.passed else 1


def cmd_verify_steps(args):
    cfg = load_config(args.config)
    ann = AnnulusDomain(parse_curve(cfg.inner), parse_curve(cfg.outer))
    rep = verify_steps(ann)
    cols = ["step", "passed", "violation"]
    rows = [("1", rep.step1, rep.step1_violation), ("2", rep.step2, rep.step2_violation),
            ("3", rep.step3, rep.step3_violation)]
    sys.stdout.write(",".join(cols) + "\n")
    for r in rows:
        sys.stdout.write(",".join(format_value(v) for v in r) + "\n")
    return 0 if rep.passed else 1


def build_parser():
    p = argparse.ArgumentParser(prog="magspec", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("spectrum", help="closed-form spectra of circles and product cylinders")
    sp.add_argument("domain", choices=["circle", "product"])
    sp.add_argument("--length", type=float, default=2 * np.pi)
    sp.add_argument("--flux", type=float, default=0.5)
    sp.add_argument("--modes", type=int, default=4)
    sp.add_argument("--a", type=float, default=1.0, help="cylinder width (product only)")
    sp.add_argument("--n", type=int, default=1024, help="grid size of the numeric circle check")
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("solve", help="run a scenario config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--output", default="")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("sweep", help="sweep the flux of a scenario")
    sp.add_argument("--config", required=True)
    sp.add_argument("--param", default="phi")
    sp.add_argument("--from", dest="start", type=float, default=0.0)
    sp.add_argument("--to", dest="stop", type=float, default=1.0)
    sp.add_argument("--steps", type=int, default=21)
    sp.add_argument("--output", default="")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("verify-steps", help="check the three monotonicity steps on an annulus")
    sp.add_argument("--config", required=True)
    sp.set_defaults(func=cmd_verify_steps)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for line, msg in exc.errors:
            print(f"{args.config}:{line}: {msg}", file=sys.stderr)
        return 2
    except MagspecError as exc:
        print(f"magspec: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
