"""Curves, metric cylinders and planar annuli.

Everything here is geometric preprocessing for the spectral bounds: curve
lengths and curvatures, the normal-ray map from the convex inner boundary of
an annulus to its outer boundary, and the foliation constants that enter the
lower bounds.

Conventions
-----------
Curves are parametrized on ``u in [0, 1)`` and are always stored with
counterclockwise orientation, so that the signed curvature of a convex curve
is non-negative and ``normal`` points outward.  Fluxes computed on these
curves inherit the counterclockwise orientation.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

from .errors import (
    DegenerateRay,
    InvalidAnnulus,
    NonRegularCurve,
    NotStarlike,
    NotStrictlyStarlike,
    RayEscapes,
    BadMetricProfile,
)

TWO_PI = 2.0 * np.pi
CONVEXITY_TOL = -1e-10
GRAZING_TOL = 1e-10


def _rot90(v):
    """Rotate vectors by +90 degrees."""
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def _cross(a, b):
    return a[..., 0] * b[...,1] - a[..., 1] * b[...,0]


class ClosedCurve:
    """Periodic regular planar curve ``u -> c(u)``, ``u in [0, 1)``.

    Parameters
    ----------
    position : callable
        Vectorized map from an array of parameters to an ``(n, 2)`` array.
    derivative, second_derivative : callable, optional
        Analytic derivatives with the same signature.  When omitted they are
        replaced by fourth-order central differences with step ``1/n_curve``.
    n_curve : int
        Resolution used for quadrature and finite differences.
    name : str
        Label used in reports.
    """

    def __init__(self, position, derivative=None, second_derivative=None,
                 n_curve=4096, name="curve"):
        self._pos = position
        self._d1 = derivative
        self._d2 = second_derivative
        self.n_curve = int(n_curve)
        self.name = name
        self._reversed = False
        u = self.nodes()
        p0 = np.asarray(position(np.array([0.0])), dtype=float).reshape(-1, 2)[0]
        p1 = np.asarray(position(np.array([1.0])), dtype=float).reshape(-1, 2)[0]
        if np.linalg.norm(p0 - p1) > 1e-12 * max(1.0, np.linalg.norm(p0)):
            raise NonRegularCurve(f"{name}: position(0) != position(1)")
        speed = np.linalg.norm(self.derivative(u), axis=1)
        if not np.all(np.isfinite(speed)):
            raise NonRegularCurve(f"{name}: non-finite derivative sample")
        if np.any(speed <= 0.0):
            raise NonRegularCurve(f"{name}: vanishing tangent")
        if self.signed_area() < 0.0:
            self._reversed = True

    def nodes(self, n=None):
        n = self.n_curve if n is None else int(n)
        return np.arange(n) / n

    def _map(self, u):
        u = np.mod(np.asarray(u, dtype=float), 1.0)
        return 1.0 - u if self._reversed else u

    def position(self, u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return np.asarray(self._pos(self._map(u)), dtype=float).reshape(-1, 2)

    def derivative(self, u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        sign = -1.0 if self._reversed else 1.0
        if self._d1 is not None:
            d = np.asarray(self._d1(self._map(u)), dtype=float).reshape(-1, 2)
            return sign * d
        h = 1.0 / self.n_curve
        f = self.position
        return (8 * (f(u + h) - f(u - h)) - (f(u + 2 * h) - f(u - 2 * h))) / (12 * h)

    def second_derivative(self, u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if self._d2 is not None:
            return np.asarray(self._d2(self._map(u)), dtype=float).reshape(-1, 2)
        h = 1.0 / self.n_curve
        f = self.derivative
        return (8 * (f(u + h) - f(u - h)) - (f(u + 2 * h) - f(u - 2 * h))) / (12 * h)

    def speed(self, u):
        return np.linalg.norm(self.derivative(u), axis=1)

    def tangent(self, u):
        d = self.derivative(u)
        n = np.linalg.norm(d, axis=1)
        if np.any(n <= 0.0) or not np.all(np.isfinite(n)):
            raise NonRegularCurve(f"{self.name}: zero or non-finite tangent")
        return d / n[:, None]

    def normal(self, u):
        """Outward unit normal (the tangent rotated by -90 degrees)."""
        return -_rot90(self.tangent(u))

    def curvature(self, u):
        d1 = self.derivative(u)
        d2 = self.second_derivative(u)
        s = np.linalg.norm(d1, axis=1)
        if np.any(s <= 0.0) or not np.all(np.isfinite(s)):
            raise NonRegularCurve(f"{self.name}: zero or non-finite tangent")
        return _cross(d1, d2) / s**3

    def signed_area(self):
        p = self.position(self.nodes())
        q = np.roll(p, -1, axis=0)
        return 0.5 * float(np.sum(_cross(p, q)))

    def length(self):
        return curve_length(self)

    def polygon(self, n=None):
        return self.position(self.nodes(n))

    def is_convex(self, n=None):
        return bool(np.min(self.curvature(self.nodes(n))) >= CONVEXITY_TOL)


def curve_length(c):
    """Length of a closed curve by periodic trapezoidal quadrature."""
    if getattr(c, "exact_length", None) is not None:
        return float(c.exact_length)
    u = c.nodes()
    speed = np.linalg.norm(c.derivative(u), axis=1)
    if not np.all(np.isfinite(speed)):
        raise NonRegularCurve(f"{c.name}: non-finite derivative sample")
    return float(np.mean(speed))


def curvature_at(c, u):
    """Signed curvature of ``c`` at ``u`` (positive for convex, CCW curves)."""
    k = c.curvature(np.atleast_1d(u))
    return float(k[0]) if np.ndim(u) == 0 else k


# ---------------------------------------------------------------- families

def circle(radius=1.0, center=(0.0, 0.0), n_curve=4096):
    R = float(radius)
    cx, cy = map(float, center)

    def pos(u):
        a = TWO_PI * u
        return np.stack([cx + R * np.cos(a), cy + R * np.sin(a)], axis=-1)

    def d1(u):
        a = TWO_PI * u
        return TWO_PI * R * np.stack([-np.sin(a), np.cos(a)], axis=-1)

    def d2(u):
        a = TWO_PI * u
        return -TWO_PI**2 * R * np.stack([np.cos(a), np.sin(a)], axis=-1)

    c = ClosedCurve(pos, d1, d2, n_curve=n_curve, name=f"circle(r={R:g})")
    c.exact_length = TWO_PI * R
    return c


def ellipse(a=2.0, b=1.0, center=(0.0, 0.0), angle=0.0, n_curve=4096):
    cx, cy = map(float, center)
    ca, sa = np.cos(angle), np.sin(angle)
    rot = np.array([[ca, -sa], [sa, ca]])

    def pos(u):
        w = TWO_PI * u
        p = np.stack([a * np.cos(w), b * np.sin(w)], axis=-1)
        return p @ rot.T + np.array([cx, cy])

    def d1(u):
        w = TWO_PI * u
        return TWO_PI * np.stack([-a * np.sin(w), b * np.cos(w)], axis=-1) @ rot.T

    def d2(u):
        w = TWO_PI * u
        return -TWO_PI**2 * np.stack([a * np.cos(w), b * np.sin(w)], axis=-1) @ rot.T

    return ClosedCurve(pos, d1, d2, n_curve=n_curve, name=f"ellipse({a:g},{b:g})")


class _PiecewiseCurve:
    """Straight segments joined by circular fillets, evaluated piecewise."""

    def __init__(self, pieces):
        # piece: (kind, data, length, u_weight)
        self.pieces = pieces
        w = np.array([p[3] for p in pieces], dtype=float)
        self.u_edges = np.concatenate([[0.0], np.cumsum(w) / w.sum()])
        self.length = float(sum(p[2] for p in pieces))

    def _locate(self, u):
        u = np.mod(u, 1.0)
        idx = np.clip(np.searchsorted(self.u_edges, u, side="right") - 1,
                      0, len(self.pieces) - 1)
        du = self.u_edges[idx + 1] - self.u_edges[idx]
        frac = (u - self.u_edges[idx]) / du
        return idx, frac, du

    def _eval(self, u, order):
        u = np.atleast_1d(u)
        idx, frac, du = self._locate(u)
        out = np.empty((u.size, 2))
        for i, (kind, data, length, _) in enumerate(self.pieces):
            sel = idx == i
            if not np.any(sel):
                continue
            f = frac[sel]
            scale = 1.0 / du[sel]
            if kind == "line":
                p0, p1 = data
                if order == 0:
                    out[sel] = p0 + f[:, None] * (p1 - p0)
                elif order == 1:
                    out[sel] = (p1 - p0)[None, :] * scale[:, None]
                else:
                    out[sel] = 0.0
            else:
                center, rad, a0, a1 = data
                ang = a0 + f * (a1 - a0)
                da = (a1 - a0) * scale
                e = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
                if order == 0:
                    out[sel] = center + rad * e
                elif order == 1:
                    out[sel] = rad * da[:, None] * _rot90(e)
                else:
                    out[sel] = -rad * (da**2)[:, None] * e
        return out


def rounded_polygon(vertices, corner_radius=0.05, arc_weight=0.0,
                    n_curve=4096, name="rounded_polygon"):
    """Polygon with every corner replaced by a tangent circular fillet.

    ``arc_weight`` adds ``arc_weight * |turning angle|`` to the parameter
    length of each fillet, which spreads rays from a sharp convex corner over
    more samples.  Vertices must be listed counterclockwise.
    """
    V = np.asarray(vertices, dtype=float)
    n = len(V)
    if n < 3:
        raise NonRegularCurve("rounded_polygon needs at least 3 vertices")
    rc = float(corner_radius)
    pieces = []
    starts, ends, arcs = [], [], []
    for i in range(n):
        p_prev, p, p_next = V[i - 1], V[i], V[(i + 1) % n]
        d_in = (p - p_prev) / np.linalg.norm(p - p_prev)
        d_out = (p_next - p) / np.linalg.norm(p_next - p)
        turn = np.arctan2(_cross(d_in, d_out), np.dot(d_in, d_out))
        tau = rc * np.tan(abs(turn) / 2.0)
        a = p - tau * d_in
        b = p + tau * d_out
        sign = 1.0 if turn > 0 else -1.0
        center = a + sign * rc * _rot90(d_in)
        a0 = np.arctan2(*(a - center)[::-1])
        arcs.append((center, a, b, a0, turn))
    for i in range(n):
        center, a, b, a0, turn = arcs[i]
        if abs(turn) > 0:
            length = rc * abs(turn)
            pieces.append(("arc", (center, rc, a0, a0 + turn), length,
                           length + arc_weight * abs(turn)))
        nxt = arcs[(i + 1) % n][1]
        seg = np.linalg.norm(nxt - b)
        if seg <= 0.0:
            raise NonRegularCurve(f"{name}: corner radius too large for edge {i}")
        pieces.append(("line", (b.copy(), nxt.copy()), seg, seg))
    pc = _PiecewiseCurve(pieces)
    c = ClosedCurve(lambda u: pc._eval(u, 0), lambda u: pc._eval(u, 1),
                    lambda u: pc._eval(u, 2), n_curve=n_curve, name=name)
    c.exact_length = pc.length
    c.pieces = pc
    return c


def rounded_rectangle(xmin, xmax, ymin, ymax, corner_radius=0.05, arc_weight=0.0,
                      n_curve=4096):
    V = [(xmin, ymin), (xmax, ymin), (xmax, ymax), (xmin, ymax)]
    return rounded_polygon(V, corner_radius, arc_weight, n_curve,
                           name=f"rect[{xmin:g},{xmax:g}]x[{ymin:g},{ymax:g}]")


def mushroom_rectangle(delta=0.5, eps=0.1, xmin=-4.0, xmax=4.0, ymin=0.0, ymax=4.0,
                       corner_radius=None, n_curve=8192):
    """Rectangle with a mushroom (delta x delta cap on an eps-wide neck of
    length delta) attached to the middle of its top side."""
    if corner_radius is None:
        corner_radius = 0.2 * eps
    h = eps / 2.0
    cap = delta / 2.0
    top_n, top_c = ymax + delta, ymax + 2.0 * delta
    V = [(xmin, ymin), (xmax, ymin), (xmax, ymax), (h, ymax), (h, top_n),
         (cap, top_n), (cap, top_c), (-cap, top_c), (-cap, top_n), (-h, top_n),
         (-h, ymax), (xmin, ymax)]
    return rounded_polygon(V, corner_radius, 0.0, n_curve,
                           name=f"mushroom(delta={delta:g},eps={eps:g})")


def spline_curve(points, n_curve=4096, name="spline"):
    """Periodic cubic spline through a closed point list (chord parametrized)."""
    P = np.asarray(points, dtype=float)
    if np.allclose(P[0], P[-1]):
        P = P[:-1]
    chord = np.linalg.norm(np.diff(np.vstack([P, P[:1]]), axis=0), axis=1)
    if np.any(chord <= 0.0):
        raise NonRegularCurve(f"{name}: repeated points")
    knots = np.concatenate([[0.0], np.cumsum(chord)]) / chord.sum()
    cs = CubicSpline(knots, np.vstack([P, P[:1]]), bc_type="periodic")
    return ClosedCurve(lambda u: cs(np.mod(u, 1.0)),
                       lambda u: cs(np.mod(u, 1.0), 1),
                       lambda u: cs(np.mod(u, 1.0), 2),
                       n_curve=n_curve, name=name)


def read_curve_points(path):
    """Read a plain-text point list: one ``x y`` pair per line, '#' comments."""
    pts = np.loadtxt(path, comments="#", ndmin=2)
    if pts.shape[1] != 2:
        raise NonRegularCurve(f"{path}: expected two columns")
    return pts


# ---------------------------------------------------------------- cylinders

@dataclass(frozen=True)
class MetricCylinder:
    """Cylinder ``[0, a] x S^1`` with metric ``alpha^2 dr^2 + theta^2 dt^2``.

    ``t`` has period ``L_ref``.  ``alpha`` defaults to 1, which is the
    normal-coordinate form of any cylinder foliated by equidistant curves.
    """

    a: float
    L_ref: float
    theta: Callable = None
    alpha: Optional[Callable] = None
    n_check: int = 64

    def __post_init__(self):
        if not (self.a > 0 and self.L_ref > 0):
            raise BadMetricProfile("a and L_ref must be positive")
        if self.theta is None:
            object.__setattr__(self, "theta", lambda r, t: np.ones(np.broadcast(r, t).shape))
        r, t = self.sample_grid(self.n_check, self.n_check)
        th = self.theta_on(r, t)
        if not np.all(np.isfinite(th)) or np.any(th <= 0.0):
            raise BadMetricProfile("theta must be positive")
        rr = np.linspace(0.0, self.a, self.n_check)
        gap = np.abs(self.theta_on(rr, 0.0 * rr) - self.theta_on(rr, 0.0 * rr + self.L_ref))
        if np.max(gap) > 1e-12 * max(1.0, float(np.max(th))):
            raise BadMetricProfile("theta is not periodic in t")
        if self.alpha is not None:
            al = self.alpha_on(r, t)
            if not np.all(np.isfinite(al)) or np.any(al <= 0.0):
                raise BadMetricProfile("alpha must be positive")

    def sample_grid(self, n_r, n_t):
        r = np.linspace(0.0, self.a, n_r)
        t = np.arange(n_t) * self.L_ref / n_t
        return np.meshgrid(r, t, indexing="ij")

    def theta_on(self, r, t):
        return np.broadcast_to(np.asarray(self.theta(r, t), dtype=float),
                               np.broadcast(r, t).shape)

    def alpha_on(self, r, t):
        if self.alpha is None:
            return np.ones(np.broadcast(r, t).shape)
        return np.broadcast_to(np.asarray(self.alpha(r, t), dtype=float),
                               np.broadcast(r, t).shape)

    @property
    def is_product(self):
        r, t = self.sample_grid(self.n_check, self.n_check)
        flat = np.allclose(self.theta_on(r, t), 1.0, rtol=0, atol=1e-14)
        return bool(flat and (self.alpha is None or
                              np.allclose(self.alpha_on(r, t), 1.0, rtol=0, atol=1e-14)))

    def level_length(self, r, n_t=2048):
        """Length ``L_r`` of the level circle ``{r} x S^1`` (periodic trapezoid)."""
        t = np.arange(n_t) * self.L_ref / n_t
        return float(np.mean(self.theta_on(float(r) + 0.0 * t, t)) * self.L_ref)

    def max_level_length(self, n_r=257):
        rs = np.linspace(0.0, self.a, n_r)
        vals = np.array([self.level_length(r) for r in rs])
        i = int(np.argmax(vals))
        best = vals[i]
        lo, hi = rs[max(i - 1, 0)], rs[min(i + 1, n_r - 1)]
        if hi > lo:
            res = minimize_scalar(lambda r: -self.level_length(r), bounds=(lo, hi),
                                  method="bounded", options={"xatol": 1e-12})
            best = max(best, -float(res.fun))
        return best


@dataclass(frozen=True)
class FoliationConstants:
    """Gradient bounds of a boundary-adapted foliation function."""

    K: float
    L: float
    sup_grad: float
    inf_grad: float
    K_bound: Optional[float] = None


def cylinder_K(cyl, n_r=129, n_t=256):
    """Foliation constants of ``psi = r`` on a metric cylinder.

    ``|grad psi| = 1/alpha``, so ``K = sup(1/alpha) / inf(1/alpha)`` and
    ``K = 1`` whenever the r-direction is unit speed.
    """
    r, t = cyl.sample_grid(n_r, n_t)
    grad = 1.0 / cyl.alpha_on(r, t)
    sup_g, inf_g = float(grad.max()), float(grad.min())
    return FoliationConstants(K=sup_g / inf_g, L=cyl.max_level_length(),
                              sup_grad=sup_g, inf_grad=inf_g)


# ---------------------------------------------------------------- annuli

def _point_in_polygon(points, poly):
    """Even-odd test of many points against one closed polygon."""
    x, y = points[:, 0][:, None], points[:, 1][:, None]
    x0, y0 = poly[:, 0][None, :], poly[:, 1][None, :]
    x1, y1 = np.roll(poly[:, 0], -1)[None, :], np.roll(poly[:, 1], -1)[None, :]
    crosses = (y0 > y) != (y1 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
    return (np.count_nonzero(crosses & (x < xint), axis=1) % 2) == 1


@dataclass(frozen=True)
class RayHits:
    """Vectorized result of the normal-ray map at parameters ``u``."""

    u: np.ndarray
    x: np.ndarray
    N: np.ndarray
    Q: np.ndarray
    r: np.ndarray
    u2: np.ndarray
    normal2: np.ndarray
    cos_theta: np.ndarray

    @property
    def theta_x(self):
        return np.arccos(np.clip(self.cos_theta, -1.0, 1.0))


class AnnulusDomain:
    """Planar annulus bounded by a convex inner curve and an outer curve."""

    def __init__(self, sigma1, sigma2, n_rays=4096, check=True):
        self.sigma1 = sigma1
        self.sigma2 = sigma2
        self.n_rays = int(n_rays)
        if check:
            self._validate()
        self._poly2 = sigma2.polygon(max(sigma2.n_curve, self.n_rays))
        self._poly2_u = sigma2.nodes(len(self._poly2))
        self._cache = {}

    def cached(self, key, fn):
        """Memoize a derived quantity (the domain is immutable)."""
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    def _validate(self):
        p1 = self.sigma1.polygon(1024)
        p2 = self.sigma2.polygon(1024)
        if not np.all(_point_in_polygon(p1, self.sigma2.polygon())):
            raise InvalidAnnulus("inner curve is not inside the outer curve")
        if np.any(_point_in_polygon(p2, self.sigma1.polygon())):
            raise InvalidAnnulus("outer curve enters the inner curve")
        if np.min(self.sigma1.curvature(self.sigma1.nodes(self.n_rays))) < CONVEXITY_TOL:
            raise InvalidAnnulus("inner curve is not convex")

    @property
    def l(self):
        return curve_length(self.sigma1)

    @property
    def L(self):
        return curve_length(self.sigma2)

    @property
    def outer_convex(self):
        return self.sigma2.is_convex(max(self.n_rays, self.sigma2.n_curve))


def ray_map(ann, u, strict=True):
    """First hit of the outward normal rays from ``sigma1(u)`` with ``sigma2``.

    Candidate crossings are found against a dense polygon of ``sigma2`` and
    refined by Newton's method on ``x + t N = sigma2(v)`` to ~1e-13.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    x = ann.sigma1.position(u)
    N = ann.sigma1.normal(u)
    P0 = ann._poly2
    P1 = np.roll(P0, -1, axis=0)
    E = P1 - P0
    v0 = ann._poly2_u
    nseg = len(P0)
    t_best = np.full(u.size, np.inf)
    j_best = np.zeros(u.size, dtype=int)
    s_best = np.zeros(u.size)
    chunk = max(1, 8_000_000 // nseg)
    for lo in range(0, u.size, chunk):
        xs, Ns = x[lo:lo + chunk], N[lo:lo + chunk]
        # side of each polygon vertex relative to the ray's line
        side = (Ns[:, 0:1] * (P0[None, :, 1] - xs[:, 1:2])
                - Ns[:, 1:2] * (P0[None, :, 0] - xs[:, 0:1])) >= 0.0
        rows, segs = np.nonzero(side != np.roll(side, -1, axis=1))
        d = P0[segs] - xs[rows]
        den = _cross(Ns[rows], E[segs])
        with np.errstate(divide="ignore", invalid="ignore"):
            t = _cross(d, E[segs]) / den
            sp = _cross(d, Ns[rows]) / den
        t = np.where((den != 0) & (t > 0), t, np.inf)
        order = np.lexsort((t, rows))
        rows, segs, t, sp = rows[order], segs[order], t[order], sp[order]
        first = np.ones(rows.size, dtype=bool)
        first[1:] = rows[1:] != rows[:-1]
        r0 = rows[first] + lo
        t_best[r0] = t[first]
        j_best[r0] = segs[first]
        s_best[r0] = np.clip(sp[first], 0.0, 1.0)
    if np.any(~np.isfinite(t_best)):
        raise RayEscapes("normal ray does not meet the outer curve")
    du = 1.0 / nseg
    v = v0[j_best] + s_best * du
    t = t_best.copy()
    for _ in range(40):
        c = ann.sigma2.position(v)
        dc = ann.sigma2.derivative(v)
        F = x + t[:, None] * N - c
        det = _cross(N, -dc)
        bad = np.abs(det) == 0
        det = np.where(bad, 1.0, det)
        dt = -_cross(F, -dc) / det
        dv = -_cross(N, F) / det
        dt = np.where(bad, 0.0, dt)
        dv = np.where(bad, 0.0, np.clip(dv, -du, du))
        t += dt
        v += dv
        if np.max(np.abs(dt)) < 1e-14 * max(1.0, np.max(t)) and np.max(np.abs(dv)) < 1e-15:
            break
    v = np.mod(v, 1.0)
    Q = ann.sigma2.position(v)
    n2 = ann.sigma2.normal(v)
    cos_t = np.einsum("ij,ij->i", N, n2)
    if strict and np.any(np.abs(cos_t) < GRAZING_TOL):
        raise DegenerateRay("normal ray grazes the outer curve")
    r = np.linalg.norm(Q - x, axis=1)
    return RayHits(u=u, x=x, N=N, Q=Q, r=r, u2=v, normal2=n2, cos_theta=cos_t)


@dataclass(frozen=True)
class StarlikeReport:
    is_starlike: bool
    m: float
    m_sampled: float
    refinement_delta: float
    reason: str = ""


def _refine_extremum(fun, u, values, kind):
    """Refine a sampled min/max of ``fun`` with a bounded scalar search
    around the arg-extremum; returns ``(value, delta)``."""
    i = int(np.argmin(values) if kind == "min" else np.argmax(values))
    best = float(values[i])
    h = 1.0 / len(u)
    sign = 1.0 if kind == "min" else -1.0
    fine = u[i] + np.linspace(-h, h, 9)
    fv = np.array([fun(np.array([w]))[0] for w in fine])
    j = int(np.argmin(sign * fv))
    cand = float(fv[j])
    lo, hi = fine[max(j - 1, 0)], fine[min(j + 1, 8)]
    res = minimize_scalar(lambda w: sign * fun(np.array([w]))[0], bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-12})
    cand = min(sign * cand, float(res.fun)) * sign
    refined = min(best, cand) if kind == "min" else max(best, cand)
    return refined, abs(refined - best)


def starlike_check(ann):
    """Test bijectivity of ``x -> Q(x)`` and compute ``m = min cos(theta_x)``."""
    return ann.cached("starlike", lambda: _starlike_check(ann))


def _starlike_check(ann):
    u = ann.sigma1.nodes(ann.n_rays)
    try:
        hits = ray_map(ann, u)
    except DegenerateRay as exc:
        return StarlikeReport(False, 0.0, 0.0, 0.0, str(exc))
    steps = np.mod(np.diff(np.concatenate([hits.u2, hits.u2[:1]])), 1.0)
    winding = float(np.sum(steps))
    monotone = bool(np.all(steps > 0) and abs(winding - 1.0) < 1e-9)
    # surjectivity: a jump of Q skips part of sigma2; compare the skipped
    # arc with the arc predicted by the derivative of Q on both sides
    nc = normal_coords(ann, ann.n_rays)
    dQ = np.hypot(nc.speed * (1.0 + nc.rho * nc.k), nc.rho_u) / len(u)
    predicted = 0.5 * (dQ + np.roll(dQ, -1))
    mid = hits.u2 + 0.5 * steps
    arc = steps * ann.sigma2.speed(mid)
    jumps = arc > 10.0 * predicted + 1e-12
    onto = not bool(np.any(jumps))
    m_s = float(np.min(hits.cos_theta))
    degenerate = False
    try:
        m, delta = _refine_extremum(lambda w: ray_map(ann, w).cos_theta, u,
                                    hits.cos_theta, "min")
    except DegenerateRay:
        m, delta, degenerate = 0.0, m_s, True
    ok = monotone and onto and not degenerate and m_s > 0
    if not monotone:
        reason = "ray map is not monotone"
    elif not onto:
        reason = "ray map misses part of the outer curve"
    elif degenerate:
        reason = "a normal ray grazes the outer curve"
    else:
        reason = ""
    return StarlikeReport(ok, m, m_s, delta, reason)


@dataclass(frozen=True)
class AnnulusConstants:
    beta: float
    B: float
    m: float
    L: float
    l: float
    outer_convex: bool
    deltas: dict = field(default_factory=dict)


def annulus_constants(ann):
    """``beta = min r``, ``B = max r``, ``m``, and the two boundary lengths."""
    return ann.cached("constants", lambda: _annulus_constants(ann))


def _annulus_constants(ann):
    rep = starlike_check(ann)
    if not rep.is_starlike:
        raise NotStarlike(rep.reason or "annulus is not starlike")
    u = ann.sigma1.nodes(ann.n_rays)
    r = ray_map(ann, u).r
    f = lambda w: ray_map(ann, w).r
    beta, d_beta = _refine_extremum(f, u, r, "min")
    B, d_B = _refine_extremum(f, u, r, "max")
    return AnnulusConstants(beta=beta, B=B, m=rep.m, L=ann.L, l=ann.l,
                            outer_convex=ann.outer_convex,
                            deltas={"beta": d_beta, "B": d_B, "m": rep.refinement_delta})


@dataclass(frozen=True)
class AnnulusNormalCoords:
    """Normal coordinates ``(t, u)`` based on the inner curve.

    The point ``sigma1(u) + t N(u)`` has Euclidean metric
    ``dt^2 + (Theta * speed)^2 du^2`` with ``Theta = 1 + t k``.  ``rho_s`` is
    the arc-length derivative of the ray length.
    """

    u: np.ndarray
    x: np.ndarray
    N: np.ndarray
    speed: np.ndarray
    k: np.ndarray
    rho: np.ndarray
    rho_u: np.ndarray
    cos_theta: np.ndarray

    @property
    def rho_s(self):
        return self.rho_u / self.speed

    def Theta(self, t, idx=slice(None)):
        return 1.0 + np.asarray(t) * self.k[idx]

    def point(self, t, idx=slice(None)):
        return self.x[idx] + np.asarray(t)[..., None] * self.N[idx]


def normal_coords(ann, n=None):
    """Sample the ray data at ``n`` uniform parameters of the inner curve.

    The ray-length derivative is obtained exactly from the outer normal at
    ``Q``: differentiating ``Q = x + rho N`` and using ``n2 . Q' = 0`` gives
    ``rho_u = -speed (1 + rho k) (n2 . T) / (n2 . N)``.
    """
    n = ann.n_rays if n is None else int(n)
    return ann.cached(("normal_coords", n), lambda: _normal_coords(ann, n))


def _normal_coords(ann, n):
    u = ann.sigma1.nodes(n)
    hits = ray_map(ann, u)
    k = np.maximum(ann.sigma1.curvature(u), 0.0)
    speed = ann.sigma1.speed(u)
    T = ann.sigma1.tangent(u)
    n2T = np.einsum("ij,ij->i", hits.normal2, T)
    rho_u = -speed * (1.0 + hits.r * k) * n2T / hits.cos_theta
    return AnnulusNormalCoords(u=u, x=hits.x, N=hits.N, speed=speed, k=k, rho=hits.r,
                               rho_u=rho_u, cos_theta=hits.cos_theta)


def grad_psi_sq(nc, t, idx=slice(None)):
    """``|grad psi|^2`` for ``psi = t / rho(s)``, linear along each ray."""
    rho = nc.rho[idx]
    Th = nc.Theta(t, idx)
    return (Th**2 * rho**2 + t**2 * nc.rho_s[idx]**2) / (Th**2 * rho**4)


def foliation_K_annulus(ann, n_t=512, n_s=512, constants=None):
    """Foliation constants of the ray-linear function on a starlike annulus."""
    c = annulus_constants(ann) if constants is None else constants
    if c.m <= 0.0:
        raise NotStrictlyStarlike("m <= 0")
    nc = normal_coords(ann, n_s)
    tau = np.linspace(0.0, 1.0, n_t)
    t = tau[:, None] * nc.rho[None, :]
    g = np.sqrt(grad_psi_sq(nc, t))
    sup_g, inf_g = float(g.max()), float(g.min())
    K = sup_g / inf_g
    K_bound = c.B / (c.beta * c.m)
    if K > K_bound * (1 + 1e-6):
        raise AssertionError(f"K={K} exceeds the a-priori bound {K_bound}")
    return FoliationConstants(K=K, L=c.L, sup_grad=sup_g, inf_grad=inf_g, K_bound=K_bound)


def level_curve_length(ann, r, nc=None):
    """Length of the level curve ``{psi = r}`` of the ray-linear foliation."""
    if not 0.0 <= r <= 1.0:
        raise ValueError("r must lie in [0, 1]")
    nc = normal_coords(ann) if nc is None else nc
    integrand = np.sqrt((r * nc.rho_u)**2 + ((1.0 + r * nc.k * nc.rho) * nc.speed)**2)
    return float(np.mean(integrand))
