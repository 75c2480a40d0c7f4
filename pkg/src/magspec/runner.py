"""Run a :class:`~magspec.config.ScenarioConfig` and collect its report."""

import platform
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from .config import parse_curve
from .experiments import (annulus_rows, circle_rows, cylinder_rows, growing_annulus_rows,
                          log_cutoff_rows, mushroom_rows, rect_annulus_rows, thin_annulus_rows)
from .geometry import AnnulusDomain, MetricCylinder
from .operators import MIN_CUT_FRACTION
from .report import all_passed
from .solver import CLUSTER_GAP, MAX_ITER, SEED

DEFAULT_PARAMS = {"thin_annulus": [0.2, 0.1, 0.05], "growing_annulus": [2.0, 4.0, 8.0],
                  "rect_annulus": [0.2, 0.1, 0.05], "mushroom": [0.3, 0.2], "log_cutoff": [0.01]}


@dataclass
class ScenarioReport:
    rows: list
    metadata: dict

    @property
    def passed(self):
        return all_passed(self.rows)


def metadata_for(cfg):
    return {
        "magspec_version": __version__, "python": platform.python_version(),
        "scenario": cfg.scenario, "phi": cfg.phi, "potential": cfg.potential,
        "resolutions": " ".join("x".join(map(str, r)) for r in cfg.resolutions),
        "h": cfg.h, "solver_tol": cfg.tol, "solver_max_iter": MAX_ITER, "solver_seed": SEED,
        "cluster_gap": CLUSTER_GAP, "cut_cell_min_fraction": MIN_CUT_FRACTION,
        "slack_rule": "richardson |coarse-fine|/3 + tol",
    }


def run_scenario(cfg):
    """Rows for every (parameter, resolution) combination of ``cfg``."""
    params = cfg.params or DEFAULT_PARAMS.get(cfg.scenario, [])
    s = cfg.scenario
    if s == "circle":
        rows = []
        for res in cfg.resolutions:
            rows += circle_rows(cfg.length, cfg.phi, res[-1], cfg.tol, modes=max(cfg.modes, 2))
    elif s == "cylinder":
        cyl = MetricCylinder(cfg.a, cfg.length, cfg.theta_fn())
        rows = cylinder_rows(cyl, cfg.phi, cfg.resolutions, cfg.tol, param=cfg.theta)
    elif s == "annulus":
        ann = AnnulusDomain(parse_curve(cfg.inner), parse_curve(cfg.outer))
        rows = annulus_rows(ann, cfg.phi, cfg.resolutions, cfg.tol, slit=True,
                            potential=cfg.potential)
    elif s == "thin_annulus":
        res = cfg.resolutions
        rows = thin_annulus_rows(params, cfg.phi, [r[0] for r in res], [r[1] for r in res], cfg.tol)
    elif s == "growing_annulus":
        rows = growing_annulus_rows(params, cfg.phi, tol=cfg.tol)
    elif s == "rect_annulus":
        rows = rect_annulus_rows(params, cfg.phi, cfg.h, cfg.tol)
    elif s == "mushroom":
        rows = mushroom_rows(params, cfg.phi, cfg.h, cfg.tol)
    elif s == "log_cutoff":
        rows = log_cutoff_rows(params, cfg.phi, cfg.tol)
    else:
        raise KeyError(s)
    return ScenarioReport(rows, metadata_for(cfg))


def sweep(cfg, param="phi", start=0.0, stop=1.0, steps=21):
    """Run ``cfg`` over ``steps`` values of ``param``, keeping the finest row of each run."""
    if param != "phi":
        raise ValueError("only 'phi' can be swept")
    rows = []
    for v in np.linspace(start, stop, steps):
        rep = run_scenario(replace(cfg, phi=float(v)))
        last = rep.rows[-1] if cfg.scenario != "circle" else rep.rows[0]
        rows.append(dict(last, param=float(v)))
    meta = metadata_for(cfg)
    meta.update(sweep_param=param, sweep_from=start, sweep_to=stop, sweep_steps=steps)
    return ScenarioReport(rows, meta)
