"""INI scenario configuration with validated values and line-numbered errors.

Sections ``[domain]``, ``[potential]``, ``[grid]``, ``[solver]``,
``[output]``.  Metric profiles are arithmetic expressions in ``r`` and ``t``
evaluated through a whitelisted AST; curves are written as calls such as
``circle(3, 1, 0)``.
"""

import ast
import configparser
import math
import re
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ConfigError
from .geometry import circle, ellipse, read_curve_points, rounded_rectangle, spline_curve

SCENARIOS = ("circle", "cylinder", "annulus", "thin_annulus", "growing_annulus",
             "rect_annulus", "mushroom", "log_cutoff")

_FUNCS = {"sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
          "sqrt": np.sqrt, "abs": np.abs, "cosh": np.cosh, "sinh": np.sinh, "tanh": np.tanh}
_CONSTS = {"pi": math.pi, "e": math.e}
_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant,
          ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd)


def compile_expression(text, variables=("r", "t")):
    """Callable ``f(*variables)`` for an arithmetic expression string."""
    tree = ast.parse(text.strip(), mode="eval")
    for node in ast.walk(tree):
        if not isinstance(node, _NODES):
            raise ValueError(f"disallowed syntax {type(node).__name__!r}")
        if isinstance(node, ast.Name) and node.id not in _FUNCS and node.id not in _CONSTS \
                and node.id not in variables:
            raise ValueError(f"unknown name {node.id!r}")
        if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name)
                                               and node.func.id in _FUNCS):
            raise ValueError("only whitelisted functions may be called")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ValueError("only numeric constants are allowed")
    code = compile(tree, "<expr>", "eval")
    env = {"__builtins__": {}, **_FUNCS, **_CONSTS}

    def fn(*args):
        shape = np.broadcast(*args).shape if args else ()
        val = eval(code, env, dict(zip(variables, args)))
        return np.broadcast_to(np.asarray(val, dtype=float), shape).copy()

    fn.source = text.strip()
    return fn


_CURVES = {"circle": circle, "ellipse": ellipse, "rounded_rectangle": rounded_rectangle}


def parse_curve(text):
    """``circle(r[, cx, cy])``, ``ellipse(a, b[, cx, cy])``,
    ``rounded_rectangle(xmin, xmax, ymin, ymax[, radius, arc_weight])`` or
    ``points:<path>`` (periodic spline through a point file)."""
    text = text.strip()
    if text.startswith("points:"):
        return spline_curve(read_curve_points(text[len("points:"):].strip()))
    node = ast.parse(text, mode="eval").body
    if not (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
            and node.func.id in _CURVES):
        raise ValueError(f"unknown curve {text!r}")
    args = [float(ast.literal_eval(a)) for a in node.args]
    name = node.func.id
    if name in ("circle", "ellipse"):
        k = 1 if name == "circle" else 2
        if len(args) not in (k, k + 2):
            raise ValueError(f"{name} takes {k} or {k + 2} numbers")
        centre = tuple(args[k:]) or (0.0, 0.0)
        return _CURVES[name](*args[:k], center=centre)
    if len(args) not in (4, 5, 6):
        raise ValueError("rounded_rectangle takes 4 to 6 numbers")
    return rounded_rectangle(*args)


def _floats(text):
    vals = [float(v) for v in re.split(r"[,\s]+", text.strip()) if v]
    if not vals:
        raise ValueError("empty list")
    return vals


def _resolutions(text):
    out = []
    for item in re.split(r"[,\s]+", text.strip()):
        if not item:
            continue
        parts = item.lower().split("x")
        out.append(tuple(int(p) for p in parts))
    if not out:
        raise ValueError("empty resolution list")
    return out


@dataclass
class ScenarioConfig:
    """Validated scenario description (see :func:`parse_config`)."""

    scenario: str
    length: float = 2 * math.pi
    a: float = 1.0
    theta: str = "1"
    inner: str = "circle(1)"
    outer: str = "circle(2)"
    params: list = field(default_factory=list)
    potential: str = "harmonic"
    phi: float = 0.5
    resolutions: list = field(default_factory=lambda: [(32, 128), (64, 256)])
    h: float = 0.1
    tol: float = 1e-8
    modes: int = 1
    output: str = ""
    lines: dict = field(default_factory=dict, compare=False, repr=False)

    def theta_fn(self):
        return compile_expression(self.theta)

    def to_text(self):
        res = ", ".join("x".join(str(v) for v in r) for r in self.resolutions)
        params = ", ".join(repr(float(p)) for p in self.params)
        return "\n".join([
            "[domain]", f"scenario = {self.scenario}", f"length = {self.length!r}",
            f"a = {self.a!r}", f"theta = {self.theta}", f"inner = {self.inner}",
            f"outer = {self.outer}"] + ([f"params = {params}"] if self.params else []) + [
            "", "[potential]", f"kind = {self.potential}", f"phi = {self.phi!r}",
            "", "[grid]", f"resolutions = {res}", f"h = {self.h!r}",
            "", "[solver]", f"tol = {self.tol!r}", f"modes = {self.modes}",
            "", "[output]", f"path = {self.output}", ""])


def _pos(v):
    return v > 0


# (section, key) -> (attribute, parser, check, message)
_SCHEMA = {
    ("domain", "scenario"): ("scenario", str.strip, lambda v: v in SCENARIOS,
                             f"must be one of {', '.join(SCENARIOS)}"),
    ("domain", "length"): ("length", float, _pos, "must be > 0"),
    ("domain", "a"): ("a", float, _pos, "must be > 0"),
    ("domain", "theta"): ("theta", str.strip, None, ""),
    ("domain", "inner"): ("inner", str.strip, None, ""),
    ("domain", "outer"): ("outer", str.strip, None, ""),
    ("domain", "params"): ("params", _floats, lambda v: all(x > 0 for x in v), "values must be > 0"),
    ("potential", "kind"): ("potential", str.strip, lambda v: v in ("harmonic", "aharonov_bohm"),
                            "must be harmonic or aharonov_bohm"),
    ("potential", "phi"): ("phi", float, math.isfinite, "must be finite"),
    ("grid", "resolutions"): ("resolutions", _resolutions,
                              lambda v: all(len(r) == 2 and min(r) >= 3 for r in v)
                              and v == sorted(v), "need ascending NxM pairs with N, M >= 3"),
    ("grid", "h"): ("h", float, _pos, "must be > 0"),
    ("solver", "tol"): ("tol", float, lambda v: 0 < v < 1, "must lie in (0, 1)"),
    ("solver", "modes"): ("modes", int, lambda v: v >= 1, "must be >= 1"),
    ("output", "path"): ("output", str.strip, None, ""),
}

# eps, R, delta and b must be positive; eps and delta also below the geometry limits
_PARAM_LIMITS = {"thin_annulus": 1.0, "rect_annulus": 1.0, "mushroom": 0.5, "log_cutoff": 0.25}


def _line_map(text):
    out, section = {}, None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"^\[([^\]]+)\]$", line)
        if m:
            section = m.group(1).strip().lower()
            out.setdefault((section, None), i)
            continue
        m = re.match(r"^([^=:#;]+?)\s*[=:]", line)
        if m and section is not None:
            out.setdefault((section, m.group(1).strip().lower()), i)
    return out


def parse_config(text):
    """Parse INI text into a :class:`ScenarioConfig`.

    All problems are collected and raised together as :class:`ConfigError`
    with ``(line, message)`` entries.
    """
    lines = _line_map(text)
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([(getattr(exc, "lineno", 0) or 0, str(exc).splitlines()[0])])
    errors, values = [], {}
    sections = {s for s, _ in _SCHEMA}
    for sec in cp.sections():
        if sec.lower() not in sections:
            errors.append((lines.get((sec.lower(), None), 0), f"unknown section [{sec}]"))
            continue
        for key, raw in cp.items(sec):
            loc = lines.get((sec.lower(), key), 0)
            spec = _SCHEMA.get((sec.lower(), key))
            if spec is None:
                errors.append((loc, f"unknown key {key!r} in [{sec}]"))
                continue
            attr, parser, check, msg = spec
            try:
                val = parser(raw)
            except (ValueError, TypeError) as exc:
                errors.append((loc, f"{sec}.{key}: cannot parse {raw!r} ({exc})"))
                continue
            if check is not None and not check(val):
                errors.append((loc, f"{sec}.{key}: {msg}"))
                continue
            values[attr] = val
            values.setdefault("lines", {})[attr] = loc
    if "scenario" not in values and not any("scenario" in e[1] for e in errors):
        errors.append((lines.get(("domain", None), 0), "missing required key domain.scenario"))
    scen = values.get("scenario")
    locs = values.get("lines", {})
    for attr, compiler in (("theta", compile_expression), ("inner", parse_curve),
                           ("outer", parse_curve)):
        if attr in values:
            try:
                compiler(values[attr])
            except (ValueError, SyntaxError) as exc:
                errors.append((locs.get(attr, 0), f"domain.{attr}: {exc}"))
    if scen in _PARAM_LIMITS and "params" in values:
        lim = _PARAM_LIMITS[scen]
        if any(p >= lim for p in values["params"]):
            errors.append((locs.get("params", 0), f"domain.params: values must be < {lim}"))
    if errors:
        raise ConfigError(sorted(errors))
    known = {f.name for f in fields(ScenarioConfig)}
    return ScenarioConfig(**{k: v for k, v in values.items() if k in known})


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
