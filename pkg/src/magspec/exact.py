"""Closed-form magnetic spectra of metric circles and product cylinders.

These are the oracles for the discrete operators: on a circle of length
``L`` with flux ``phi`` the eigenvalues are ``(2 pi / L)^2 (k - phi)^2``,
and a product ``[0, a] x circle`` adds the Neumann values ``(pi h / a)^2``.
"""

from dataclasses import dataclass

import numpy as np

from .gauge import coulomb_gauge_circle, dist_to_integers, integrate_from_zero, normalized_profile

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True, order=True)
class LabeledEigenvalue:
    value: float
    h: int
    k: int


def circle_eigenvalues(L, phi, k_min=-10, k_max=10):
    """``(k, lambda_k)`` pairs for ``k_min <= k <= k_max``, sorted by value."""
    if L <= 0:
        raise ValueError("L must be positive")
    ks = np.arange(int(k_min), int(k_max) + 1)
    lam = (TWO_PI / L) ** 2 * (ks - phi) ** 2
    order = np.lexsort((ks, lam))
    return [(int(ks[i]), float(lam[i])) for i in order]


def product_spectrum(a, L, phi, count):
    """The ``count`` smallest eigenvalues of the product cylinder with labels."""
    if a <= 0 or L <= 0:
        raise ValueError("a and L must be positive")
    count = int(count)
    k0 = int(np.round(phi))
    ks = np.arange(k0 - count - 1, k0 + count + 2)
    hs = np.arange(0, count + 1)
    H, K = np.meshgrid(hs, ks, indexing="ij")
    lam = (np.pi * H / a) ** 2 + (TWO_PI / L) ** 2 * (K - phi) ** 2
    vals = sorted(LabeledEigenvalue(float(v), int(h), int(k))
                  for v, h, k in zip(lam.ravel(), H.ravel(), K.ravel()))
    return vals[:count]


def product_lambda1(L, phi):
    """First eigenvalue of any product cylinder with level length ``L``."""
    return (TWO_PI / L) ** 2 * dist_to_integers(phi) ** 2


def circle_eigenfunction(theta, H, L, k):
    """Eigenfunction ``u_k`` of the circle ``theta(t)^2 dt^2`` with ``A = H dt``.

    ``u_k(t) = exp(i int_0^t H) exp(2 pi i (k - phi) s(t) / L)`` where
    ``s(t) = int_0^t theta`` and ``theta`` is first rescaled to total length
    ``L``.
    """
    th, _ = normalized_profile(theta, L)
    cg = coulomb_gauge_circle(H, th, L)
    phi = cg.flux

    def u(t):
        t = np.asarray(t, dtype=float)
        return np.exp(1j * integrate_from_zero(cg.H, t)) * \
            np.exp(TWO_PI * 1j * (k - phi) * integrate_from_zero(th, t) / L)

    u.flux = phi
    u.eigenvalue = (TWO_PI / L) ** 2 * (k - phi) ** 2
    return u


def verify_circle_eigen(theta, H, L, k, n=4096):
    """Max residual of the Coulomb-gauge eigen-ODE for ``u_k``.

    The eigenfunction is moved to the Coulomb gauge, ``v = exp(i g) u_k``, and
    ``-v'' + (theta'/theta) v' + 2 i c theta v' + c^2 theta^2 v - lambda
    theta^2 v`` is evaluated with periodic second-order differences on
    ``n`` nodes.
    """
    th, _ = normalized_profile(theta, L)
    cg = coulomb_gauge_circle(H, th, L)
    u = circle_eigenfunction(th, H, L, k)
    h = L / n
    t = np.arange(n) * h
    v = np.exp(1j * cg.gauge(t)) * u(t)
    dv = (np.roll(v, -1) - np.roll(v, 1)) / (2 * h)
    d2v = (np.roll(v, -1) - 2 * v + np.roll(v, 1)) / h**2
    thv = th(t)
    dth = (th(t + h) - th(t - h)) / (2 * h)
    c = cg.c
    lam = u.eigenvalue
    res = -d2v + dth / thv * dv + 2j * c * thv * dv + c**2 * thv**2 * v - lam * thv**2 * v
    return float(np.max(np.abs(res)))
