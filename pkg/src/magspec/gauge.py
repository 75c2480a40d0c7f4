"""Closed potential 1-forms, fluxes and gauge reductions.

A :class:`OneForm` lives on a two-dimensional chart with coordinates
``(x1, x2)``: ``(r, t)`` on a metric cylinder, ``(t, u)`` in annulus normal
coordinates, ``(x, y)`` in the plane.  It is the sum of a closed part
``f dx1 + h dx2`` given by callables and an optional exact part ``d(phi)``.
Keeping the exact part separate lets discrete link phases pick up
``phi(q) - phi(p)`` exactly, so discrete gauge invariance holds to rounding.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import simpson

from .errors import BadMetricProfile, NotClosed, NotClosedLoop

TWO_PI = 2.0 * np.pi
_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)


def _zero(x1, x2):
    return np.zeros(np.broadcast(x1, x2).shape)


def _const(c):
    c = float(c)
    return lambda x1, x2: np.full(np.broadcast(x1, x2).shape, c)


def integrate_from_zero(fun, upper, n=None):
    """``int_0^upper fun(x) dx`` for an array of upper limits.

    Fixed 64-point Gauss-Legendre on each interval; accurate to rounding for
    the smooth integrands used here.
    """
    upper = np.asarray(upper, dtype=float)
    x = 0.5 * upper[..., None] * (_GL_X + 1.0)
    return 0.5 * upper * np.sum(_GL_W * fun(x), axis=-1)


@dataclass(frozen=True)
class GaugeFunction:
    """Real function ``phi`` replacing ``A`` by ``A + d(phi)``.

    ``grad`` returns ``(d phi/dx1, d phi/dx2)``; when it is missing, central
    differences with step ``fd_step`` are used.
    """

    phi_fn: Callable
    grad: Optional[Callable] = None
    fd_step: float = 1e-5

    def __call__(self, x1, x2):
        return np.asarray(self.phi_fn(x1, x2), dtype=float)

    def gradient(self, x1, x2):
        if self.grad is not None:
            g1, g2 = self.grad(x1, x2)
            return np.asarray(g1, dtype=float), np.asarray(g2, dtype=float)
        e = self.fd_step
        g1 = (self(x1 + e, x2) - self(x1 - e, x2)) / (2 * e)
        g2 = (self(x1, x2 + e) - self(x1, x2 - e)) / (2 * e)
        return g1, g2


class OneForm:
    """Potential ``A = f dx1 + h dx2 + d(phi)``.

    Parameters
    ----------
    f, h : callable or float
        Components of the closed part; scalars are promoted to constants.
    exact : GaugeFunction, optional
        Exact part ``d(phi)``.
    declared_closed : bool
        Run the closedness test on ``check_box`` at construction.
    check_box : tuple
        ``(x1_min, x1_max, x2_min, x2_max)`` sampled by the closedness test.
    edge_integral : callable, optional
        Exact line integral of the closed part over straight segments,
        ``edge_integral(p, q) -> array``; overrides the midpoint rule.
    """

    def __init__(self, f=0.0, h=0.0, exact=None, declared_closed=True,
                 check_box=None, edge_integral=None, label=""):
        self.f = f if callable(f) else _const(f)
        self.h = h if callable(h) else _const(h)
        self.exact = exact
        self.declared_closed = declared_closed
        self.edge_integral = edge_integral
        self.label = label
        if declared_closed and check_box is not None:
            defect = self.closedness_defect(*check_box)
            if defect > 1e-8:
                raise NotClosed(f"dA = {defect:.3e} on the check box")

    # components including the exact part
    def components(self, x1, x2):
        f = np.asarray(self.f(x1, x2), dtype=float)
        h = np.asarray(self.h(x1, x2), dtype=float)
        if self.exact is not None:
            g1, g2 = self.exact.gradient(x1, x2)
            f, h = f + g1, h + g2
        return f, h

    def closedness_defect(self, a1, b1, a2, b2, n=33, step=1e-4):
        """max |df/dx2 - dh/dx1| on an ``n x n`` grid (central differences)."""
        x1, x2 = np.meshgrid(np.linspace(a1, b1, n), np.linspace(a2, b2, n), indexing="ij")
        df = (self.f(x1, x2 + step) - self.f(x1, x2 - step)) / (2 * step)
        dh = (self.h(x1 + step, x2) - self.h(x1 - step, x2)) / (2 * step)
        return float(np.max(np.abs(df - dh)))

    def plus_exact(self, gauge):
        """``A + d(phi)``; stacks onto an existing exact part."""
        if self.exact is None:
            new = gauge
        else:
            old = self.exact

            def phi(x1, x2):
                return old(x1, x2) + gauge(x1, x2)

            def grad(x1, x2):
                a1, a2 = old.gradient(x1, x2)
                b1, b2 = gauge.gradient(x1, x2)
                return a1 + b1, a2 + b2

            new = GaugeFunction(phi, grad)
        return OneForm(self.f, self.h, exact=new, declared_closed=False,
                       edge_integral=self.edge_integral, label=self.label)

    def link_phase(self, p, q):
        """Discrete line integral of ``A`` along straight segments ``p -> q``.

        ``p`` and ``q`` are ``(n, 2)`` chart coordinates.  The closed part uses
        the midpoint rule (or ``edge_integral``); the exact part contributes
        ``phi(q) - phi(p)``.
        """
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        if self.edge_integral is not None:
            alpha = np.asarray(self.edge_integral(p, q), dtype=float)
        else:
            m = 0.5 * (p + q)
            d = q - p
            alpha = self.f(m[:, 0], m[:, 1]) * d[:, 0] + self.h(m[:, 0], m[:, 1]) * d[:, 1]
            alpha = np.asarray(alpha, dtype=float)
        if self.exact is not None:
            alpha = alpha + self.exact(q[:, 0], q[:, 1]) - self.exact(p[:, 0], p[:, 1])
        return alpha


def harmonic_flux(phi, period):
    """Harmonic potential ``(2 pi phi / period) dx2`` with flux ``phi``."""
    return OneForm(0.0, TWO_PI * float(phi) / float(period), label=f"harmonic(phi={phi:g})")


def hdt(H):
    """Potential ``H(x2) dx2``."""
    return OneForm(0.0, lambda x1, x2: H(x2) + 0.0 * x1, label="H dt")


def aharonov_bohm(phi, center=(0.0, 0.0)):
    """Planar Aharonov-Bohm potential with flux ``phi`` around ``center``.

    ``A = phi d(arg)``; straight-segment line integrals are exact angle
    increments, so every discrete loop around the pole carries flux ``phi``.
    """
    cx, cy = map(float, center)

    def f(x, y):
        return -phi * (y - cy) / ((x - cx) ** 2 + (y - cy) ** 2)

    def h(x, y):
        return phi * (x - cx) / ((x - cx) ** 2 + (y - cy) ** 2)

    def edge(p, q):
        a = np.arctan2(p[:, 1] - cy, p[:, 0] - cx)
        b = np.arctan2(q[:, 1] - cy, q[:, 0] - cx)
        return phi * (np.mod(b - a + np.pi, TWO_PI) - np.pi)

    return OneForm(f, h, edge_integral=edge, label=f"aharonov_bohm(phi={phi:g})")


@dataclass(frozen=True)
class FluxValue:
    phi: float
    d_int: float


def dist_to_integers(phi):
    """Distance from ``phi`` to the nearest integer, in ``[0, 1/2]``."""
    phi = float(phi)
    if not np.isfinite(phi):
        raise ValueError("flux must be finite")
    return float(min(phi - np.floor(phi), np.ceil(phi) - phi))


@dataclass(frozen=True)
class Loop:
    """Closed parametrized loop ``s in [0, 1] -> chart coordinates``.

    ``period2`` is the period of the second chart coordinate (the ``t``
    circle of a cylinder); endpoints are compared modulo it.
    """

    position: Callable
    derivative: Optional[Callable] = None
    period2: Optional[float] = None

    def velocity(self, s, step=1e-6):
        if self.derivative is not None:
            return np.asarray(self.derivative(s), dtype=float)
        return (np.asarray(self.position(s + step)) - np.asarray(self.position(s - step))) / (2 * step)


def level_loop(x1, period):
    """The loop ``{x1} x [0, period]`` on a cylinder chart."""
    return Loop(lambda s: np.stack([np.full_like(s, x1), period * s], axis=-1),
                lambda s: np.stack([np.zeros_like(s), np.full_like(s, period)], axis=-1),
                period2=period)


def curve_loop(curve):
    """A planar :class:`~magspec.geometry.ClosedCurve` as a loop."""
    return Loop(curve.position, curve.derivative)


def flux_on_loop(A, loop, n=2049):
    """``(1 / 2 pi) * closed integral of A`` by composite Simpson."""
    ends = np.asarray(loop.position(np.array([0.0, 1.0])), dtype=float)
    gap = ends[1] - ends[0]
    if loop.period2:
        gap[1] = (gap[1] + 0.5 * loop.period2) % loop.period2 - 0.5 * loop.period2
    if np.linalg.norm(gap) > 1e-10 * max(1.0, np.linalg.norm(ends[0])):
        raise NotClosedLoop("loop endpoints differ")
    s = np.linspace(0.0, 1.0, n)
    p = np.asarray(loop.position(s), dtype=float)
    v = loop.velocity(s)
    f = np.asarray(A.f(p[:, 0], p[:, 1]), dtype=float)
    h = np.asarray(A.h(p[:, 0], p[:, 1]), dtype=float)
    total = simpson(f * v[:, 0] + h * v[:, 1], x=s)
    if A.exact is not None:
        total += float(A.exact(p[-1:, 0], p[-1:, 1])[0] - A.exact(p[:1, 0], p[:1, 1])[0])
    phi = float(total / TWO_PI)
    return FluxValue(phi=phi, d_int=dist_to_integers(phi))


@dataclass(frozen=True)
class HdtReduction:
    """``A + d(gauge) = H(t) dt`` on a cylinder chart."""

    H: Callable
    gauge: GaugeFunction
    defect: float


def reduce_to_Hdt(A, a, L, n_r=33, n_t=64, tol=1e-6):
    """Gauge a closed cylinder potential to the form ``H(t) dt``.

    The gauge is ``phi(r, t) = -int_0^r f(x, t) dx``.  Closedness makes
    ``h + d phi/dt`` independent of ``r``; the largest deviation over an
    ``n_r x n_t`` grid is returned as ``defect`` and must stay below ``tol``.
    """
    if A.exact is not None:
        # d(phi) has no effect on H beyond the gauge; fold it in
        base = OneForm(A.f, A.h, declared_closed=False)
        red = reduce_to_Hdt(base, a, L, n_r, n_t, tol)
        old = A.exact

        def phi(r, t):
            return red.gauge(r, t) - old(r, t)

        return HdtReduction(red.H, GaugeFunction(phi), red.defect)
    f, h = A.f, A.h

    def phi(r, t):
        r, t = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(t, dtype=float))
        return -integrate_from_zero(lambda x: f(x, t[..., None] + 0.0 * x), r)

    def dphi_dt(r, t, e=1e-5):
        return (phi(r, t + e) - phi(r, t - e)) / (2 * e)

    def grad(r, t):
        return -np.asarray(f(r, t), dtype=float), dphi_dt(r, t)

    def H(t):
        t = np.asarray(t, dtype=float)
        return np.asarray(h(0.0 * t, t), dtype=float)

    r, t = np.meshgrid(np.linspace(0.0, a, n_r), np.arange(n_t) * L / n_t, indexing="ij")
    htilde = np.asarray(h(r, t), dtype=float) + dphi_dt(r, t)
    defect = float(np.max(np.abs(htilde - H(t))))
    if defect > tol:
        raise NotClosed(f"h + dphi/dt depends on r (defect {defect:.3e})")
    return HdtReduction(H, GaugeFunction(phi, grad), defect)


@dataclass(frozen=True)
class CoulombGauge:
    """Harmonic representative ``c * theta dt`` of ``H dt`` on a circle.

    ``gauge(t) = -int_0^t H + c s(t)`` with ``s(t) = int_0^t theta``.
    """

    c: float
    flux: float
    L: float
    theta: Callable
    H: Callable

    def s(self, t):
        return integrate_from_zero(self.theta, t)

    def primitive_H(self, t):
        return integrate_from_zero(self.H, t)

    def gauge(self, t):
        return -self.primitive_H(t) + self.c * self.s(t)


def normalized_profile(theta, L, n=4096):
    """Rescale ``theta`` so that ``int_0^L theta = L``; returns ``(theta, scale)``."""
    t = np.arange(n) * L / n
    vals = np.asarray(theta(t), dtype=float) * np.ones_like(t)
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0.0):
        raise BadMetricProfile("theta must be positive and finite")
    total = float(np.mean(vals) * L)
    scale = L / total
    th = lambda t: scale * np.asarray(theta(np.asarray(t, dtype=float)), dtype=float) * np.ones_like(np.asarray(t, dtype=float))
    check = float(np.mean(th(t)) * L)
    if abs(check - L) > 1e-10 * L:
        raise BadMetricProfile("metric profile cannot be normalized to length L")
    return th, scale


def coulomb_gauge_circle(H, theta, L, n=4096):
    """Coulomb gauge of ``A = H(t) dt`` on the circle ``(R / L Z, theta^2 dt^2)``."""
    th, _ = normalized_profile(theta, L, n)
    t = np.arange(n) * L / n
    Hv = np.asarray(H(t), dtype=float) * np.ones_like(t)
    total = float(np.mean(Hv) * L)
    c = total / L
    Hf = lambda s: np.asarray(H(np.asarray(s, dtype=float)), dtype=float) * np.ones_like(np.asarray(s, dtype=float))
    cg = CoulombGauge(c=c, flux=total / TWO_PI, L=float(L), theta=th, H=Hf)
    if abs(float(cg.gauge(np.array(L)))) > 1e-10 * max(1.0, abs(total)):
        raise BadMetricProfile("Coulomb gauge is not periodic")
    return cg
