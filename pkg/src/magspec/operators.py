"""Finite-volume discretization of the magnetic Laplacian.

Every operator is assembled from its quadratic form.  Each link ``(p, q)``
between neighbouring cells contributes

    w_pq * |u_p - exp(-i alpha_pq) u_q|^2,

with ``alpha_pq`` the discrete line integral of the potential along the link
and ``w_pq`` the transverse face length over the centre distance, both
measured in the metric.  Boundary faces contribute nothing, which realizes
the magnetic Neumann condition as the natural boundary condition of the form;
Dirichlet faces add ``2 w |u_p|^2`` (ghost value ``-u_p`` across the face).
The pencil ``(S, M)`` keeps ``M`` diagonal with the metric cell areas.
"""

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy import ndimage
from scipy.io import mmwrite

from .errors import BadMask, BadMetricProfile, NotStrictlyStarlike, ThinDomainUnderresolved, ZeroVector
from .gauge import OneForm
from .geometry import annulus_constants, normal_coords

MIN_CUT_FRACTION = 0.3
MIN_CELLS_ACROSS = 8


@dataclass(frozen=True)
class GridSpec:
    """Structured grid resolution.

    For cylinders ``n_r`` counts cells along ``[0, a]`` and ``n_t`` around the
    circle.  For annuli ``n_r`` counts cells along the shortest normal ray
    and ``n_t`` counts columns along the inner curve.
    """

    n_r: int
    n_t: int
    topology: str = "cylinder"

    def __post_init__(self):
        if self.n_r < 3 or self.n_t < 3:
            raise ValueError("grids need n_r >= 3 and n_t >= 3")
        if self.topology in ("cylinder", "annulus") and self.n_t % 2:
            raise ValueError("n_t must be even for periodic grids")

    def spacings(self, a, L):
        return a / self.n_r, L / self.n_t


@dataclass
class DiscreteMagneticOperator:
    """Hermitian pencil ``(stiffness, diag(mass))`` with its link structure.

    ``raster`` maps structured positions to dof indices (``-1`` where a
    position holds no cell); ``periodic`` marks a periodic second raster
    axis.  ``p, q, w, alpha`` describe the links, ``dirichlet`` collects the
    Dirichlet face weights per dof.
    """

    stiffness: sp.csr_matrix
    mass: np.ndarray
    points: np.ndarray
    raster: np.ndarray
    periodic: bool
    p: np.ndarray
    q: np.ndarray
    w: np.ndarray
    alpha: np.ndarray
    dirichlet: np.ndarray
    bc_labels: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.mass.size

    def mass_matrix(self):
        return sp.diags(self.mass).tocsr()

    def hermitian_defect(self):
        d = self.stiffness - self.stiffness.conj().T
        return float(abs(d).max()) if d.nnz else 0.0

    def rayleigh_quotient(self, u):
        return rayleigh_quotient(self, u)

    def gauge_transform(self, phi_nodes):
        """``U S U^H`` with ``U = diag(exp(i phi))``: the stiffness for ``A + d(phi)``."""
        U = sp.diags(np.exp(1j * np.asarray(phi_nodes, dtype=float)))
        return (U @ self.stiffness @ U.conj()).tocsr()

    def restrict(self, keep, zero_potential=True):
        """Mixed problem on the cells ``keep``.

        Links leaving ``keep`` into other cells of the domain become
        Dirichlet faces; boundary faces stay Neumann.  With
        ``zero_potential`` all link phases are dropped.
        """
        keep = np.asarray(keep, dtype=bool)
        if keep.shape != (self.n,):
            keep = keep_from_raster(self, keep)
        if not keep.any():
            raise BadMask("empty subdomain")
        new_index = np.full(self.n, -1)
        new_index[keep] = np.arange(int(keep.sum()))
        inside = keep[self.p] & keep[self.q]
        cut_p = keep[self.p] & ~keep[self.q]
        cut_q = keep[self.q] & ~keep[self.p]
        dirichlet = self.dirichlet[keep].copy()
        np.add.at(dirichlet, new_index[self.p[cut_p]], 2.0 * self.w[cut_p])
        np.add.at(dirichlet, new_index[self.q[cut_q]], 2.0 * self.w[cut_q])
        p, q, w = new_index[self.p[inside]], new_index[self.q[inside]], self.w[inside]
        alpha = np.zeros_like(w) if zero_potential else self.alpha[inside]
        raster = np.where(self.raster >= 0, new_index[np.maximum(self.raster, 0)], -1)
        op = _from_links(int(keep.sum()), p, q, w, alpha, self.mass[keep], dirichlet,
                         self.points[keep], raster, self.periodic, dict(self.meta))
        op.meta["restricted_from"] = self.n
        return op

    def export_matrix_market(self, stiffness_path, mass_path=None):
        mmwrite(stiffness_path, self.stiffness.tocoo(), field="complex",
                symmetry="general", precision=17)
        if mass_path is not None:
            mmwrite(mass_path, sp.diags(self.mass).tocoo(), field="real",
                    symmetry="general", precision=17)


def keep_from_raster(op, mask):
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != op.raster.shape:
        raise BadMask(f"mask shape {mask.shape} != raster shape {op.raster.shape}")
    keep = np.zeros(op.n, dtype=bool)
    sel = op.raster >= 0
    keep[op.raster[sel]] = mask[sel]
    return keep


def _from_links(n, p, q, w, alpha, mass, dirichlet, points, raster, periodic, meta):
    p = np.asarray(p, dtype=np.int64)
    q = np.asarray(q, dtype=np.int64)
    w = np.asarray(w, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise BadMetricProfile("non-positive or non-finite link weight")
    if np.any(mass <= 0) or not np.all(np.isfinite(mass)):
        raise BadMetricProfile("non-positive or non-finite cell mass")
    off = -w * np.exp(-1j * alpha)
    diag = np.zeros(n)
    np.add.at(diag, p, w)
    np.add.at(diag, q, w)
    diag += dirichlet
    rows = np.concatenate([np.arange(n), p, q])
    cols = np.concatenate([np.arange(n), q, p])
    vals = np.concatenate([diag.astype(complex), off, np.conj(off)])
    S = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    S.sum_duplicates()
    n_dir = int(np.count_nonzero(dirichlet))
    return DiscreteMagneticOperator(
        stiffness=S, mass=np.asarray(mass, dtype=float), points=np.asarray(points),
        raster=raster, periodic=periodic, p=p, q=q, w=w, alpha=alpha,
        dirichlet=np.asarray(dirichlet, dtype=float),
        bc_labels={"magnetic-Neumann": "natural", "Dirichlet": n_dir}, meta=meta)


def rayleigh_quotient(op, u):
    """``(u^H S u) / (u^H M u)``."""
    u = np.asarray(u, dtype=complex)
    den = float(np.real(np.vdot(u, op.mass * u)))
    if den == 0.0:
        raise ZeroVector("Rayleigh quotient of the zero vector")
    num = np.vdot(u, op.stiffness @ u)
    if abs(num.imag) > 1e-12 * max(1.0, abs(num.real)):
        raise AssertionError("stiffness is not Hermitian")
    return float(num.real / den)


# ---------------------------------------------------------------- cylinders

def assemble_cylinder(cyl, A=None, grid=None):
    """Cell-centred operator on ``[0, a] x R/L_ref Z`` with metric
    ``alpha^2 dr^2 + theta^2 dt^2``; ``A`` is a :class:`OneForm` in ``(r, t)``."""
    grid = GridSpec(32, 128) if grid is None else grid
    A = OneForm(0.0, 0.0) if A is None else A
    n_r, n_t = grid.n_r, grid.n_t
    hr, ht = grid.spacings(cyl.a, cyl.L_ref)
    r = (np.arange(n_r) + 0.5) * hr
    t = np.arange(n_t) * ht
    R, T = np.meshgrid(r, t, indexing="ij")
    idx = np.arange(n_r * n_t).reshape(n_r, n_t)
    th = cyl.theta_on(R, T)
    if np.any(th <= 0):
        raise BadMetricProfile("theta <= 0 on the grid")
    mass = (cyl.alpha_on(R, T) * th * hr * ht).ravel()

    # r-links
    pr, qr = idx[:-1, :].ravel(), idx[1:, :].ravel()
    Rm, Tm = 0.5 * (R[:-1] + R[1:]), T[:-1]
    w_r = (cyl.theta_on(Rm, Tm) * ht / (cyl.alpha_on(Rm, Tm) * hr)).ravel()
    a_r = A.link_phase(np.c_[R[:-1].ravel(), Tm.ravel()], np.c_[R[1:].ravel(), Tm.ravel()])
    # t-links (periodic, unwrapped second endpoint)
    pt, qt = idx.ravel(), np.roll(idx, -1, axis=1).ravel()
    Tm2 = T + 0.5 * ht
    w_t = (cyl.alpha_on(R, Tm2) * hr / (cyl.theta_on(R, Tm2) * ht)).ravel()
    a_t = A.link_phase(np.c_[R.ravel(), T.ravel()], np.c_[R.ravel(), (T + ht).ravel()])

    points = np.c_[R.ravel(), T.ravel()]
    meta = {"kind": "cylinder", "h_r": hr, "h_t": ht, "a": cyl.a, "L_ref": cyl.L_ref}
    return _from_links(n_r * n_t, np.r_[pr, pt], np.r_[qr, qt], np.r_[w_r, w_t],
                       np.r_[a_r, a_t], mass, np.zeros(n_r * n_t), points, idx, True, meta)


def assemble_circle(L, A=None, theta=None, n=1024):
    """Periodic 1-D operator on the circle ``theta(t)^2 dt^2``, ``t in [0, L)``.

    ``A`` is a :class:`OneForm` whose second component is ``H(t)``.
    """
    if n < 3:
        raise ValueError("n >= 3 required")
    A = OneForm(0.0, 0.0) if A is None else A
    h = L / n
    t = np.arange(n) * h
    th = (lambda s: np.ones_like(s)) if theta is None else theta
    thv = np.asarray(th(t), dtype=float) * np.ones(n)
    if np.any(thv <= 0):
        raise BadMetricProfile("theta <= 0 on the grid")
    idx = np.arange(n)
    w = 1.0 / (np.asarray(th(t + 0.5 * h), dtype=float) * np.ones(n) * h)
    alpha = A.link_phase(np.c_[0 * t, t], np.c_[0 * t, t + h])
    meta = {"kind": "circle", "h_t": h, "L_ref": L}
    return _from_links(n, idx, np.roll(idx, -1), w, alpha, thv * h, np.zeros(n),
                       np.c_[0 * t, t], idx[None, :], True, meta)


# ---------------------------------------------------------------- annuli

def assemble_annulus(ann, A=None, grid=None, potential_chart="normal", constants=None):
    """Operator in normal coordinates ``(t, u)`` of a strictly starlike annulus.

    Columns follow the normal rays at ``u_j = j / n_t``; each column is cut at
    ``t = rho(u_j)``.  A trailing cell shorter than ``0.3 h_t`` is merged into
    its neighbour, otherwise it is kept as a cut cell with fractional length.
    Links between columns connect every pair of cells whose ``t``-extents
    overlap.  ``A`` is a :class:`OneForm` either in the ``(t, u)`` chart or,
    with ``potential_chart="planar"``, in Cartesian coordinates.
    """
    grid = GridSpec(16, 256, "annulus") if grid is None else grid
    c = annulus_constants(ann) if constants is None else constants
    if c.m <= 0:
        raise NotStrictlyStarlike("assemble_annulus needs m > 0")
    if grid.n_r < MIN_CELLS_ACROSS:
        raise ThinDomainUnderresolved(f"need at least {MIN_CELLS_ACROSS} cells across the gap")
    A = OneForm(0.0, 0.0) if A is None else A
    ns = grid.n_t
    nc = normal_coords(ann, ns)
    hu = 1.0 / ns
    ht = float(nc.rho.min()) / grid.n_r
    uh = nc.u + 0.5 * hu
    k_half = np.maximum(ann.sigma1.curvature(uh), 0.0)
    sp_half = ann.sigma1.speed(uh)

    lo_cols, len_cols = [], []
    for rho in nc.rho:
        x = rho / ht
        nfull = int(np.floor(x + 1e-9))
        frac = x - nfull
        lens = [ht] * nfull
        if frac >= MIN_CUT_FRACTION:
            lens.append(frac * ht)
        elif frac > 1e-9:
            lens[-1] += frac * ht
        lens = np.array(lens)
        lo_cols.append(np.arange(lens.size) * ht)
        len_cols.append(lens)
    counts = np.array([l.size for l in len_cols])
    offsets = np.r_[0, np.cumsum(counts)]
    n = int(offsets[-1])
    raster = np.full((counts.max(), ns), -1)
    for j in range(ns):
        raster[: counts[j], j] = offsets[j] + np.arange(counts[j])

    lo = np.concatenate(lo_cols)
    ln = np.concatenate(len_cols)
    hi = lo + ln
    col = np.repeat(np.arange(ns), counts)
    centre = lo + 0.5 * ln
    kc, spc = nc.k[col], nc.speed[col]
    mass = spc * hu * (ln + 0.5 * kc * (hi**2 - lo**2))
    uc = nc.u[col]

    P, Q, W, PP, QQ = [], [], [], [], []
    # links along each ray
    for j in range(ns):
        a, b = offsets[j], offsets[j + 1]
        if b - a < 2:
            continue
        i0 = np.arange(a, b - 1)
        dist = centre[i0 + 1] - centre[i0]
        te = hi[i0]
        P.append(i0)
        Q.append(i0 + 1)
        W.append((1.0 + te * nc.k[j]) * nc.speed[j] * hu / dist)
        PP.append(np.c_[centre[i0], uc[i0]])
        QQ.append(np.c_[centre[i0 + 1], uc[i0]])
    # links across rays
    for j in range(ns):
        jn = (j + 1) % ns
        a, b = offsets[j], offsets[j + 1]
        c0, c1 = offsets[jn], offsets[jn + 1]
        ia = np.arange(a, b)
        for shift in (-1, 0, 1):
            ib = ia - a + c0 + shift
            ok = (ib >= c0) & (ib < c1)
            i1, i2 = ia[ok], ib[ok]
            ov_lo = np.maximum(lo[i1], lo[i2])
            ov_hi = np.minimum(hi[i1], hi[i2])
            ov = ov_hi - ov_lo
            good = ov > 1e-12 * ht
            i1, i2, ov_lo, ov = i1[good], i2[good], ov_lo[good], ov[good]
            tm = ov_lo + 0.5 * ov
            P.append(i1)
            Q.append(i2)
            W.append(ov / ((1.0 + tm * k_half[j]) * sp_half[j] * hu))
            PP.append(np.c_[centre[i1], nc.u[j] + 0 * i1])
            QQ.append(np.c_[centre[i2], nc.u[j] + hu + 0 * i2])
    p, q, w = np.concatenate(P), np.concatenate(Q), np.concatenate(W)
    pp, qq = np.concatenate(PP), np.concatenate(QQ)
    if potential_chart == "planar":
        def to_plane(z):
            return ann.sigma1.position(z[:, 1]) + z[:, :1] * ann.sigma1.normal(z[:, 1])
        alpha = A.link_phase(to_plane(pp), to_plane(qq))
    elif potential_chart == "normal":
        alpha = A.link_phase(pp, qq)
    else:
        raise ValueError(f"unknown potential chart {potential_chart!r}")
    points = np.c_[centre, uc]
    meta = {"kind": "annulus", "h_t": ht, "h_u": hu, "n_cells": n,
            "cut_fraction_min": MIN_CUT_FRACTION}
    return _from_links(n, p, q, w, alpha, mass, np.zeros(n), points, raster, True, meta)


# ---------------------------------------------------------------- masked planar grids

@dataclass(frozen=True)
class RectilinearGrid:
    """Tensor grid of cells ``[x_i, x_{i+1}] x [y_j, y_{j+1}]``."""

    x_edges: np.ndarray
    y_edges: np.ndarray

    @classmethod
    def uniform(cls, xmin, xmax, ymin, ymax, h):
        nx = int(round((xmax - xmin) / h))
        ny = int(round((ymax - ymin) / h))
        return cls(np.linspace(xmin, xmax, nx + 1), np.linspace(ymin, ymax, ny + 1))

    @property
    def shape(self):
        return (self.x_edges.size - 1, self.y_edges.size - 1)

    @property
    def centres(self):
        xc = 0.5 * (self.x_edges[1:] + self.x_edges[:-1])
        yc = 0.5 * (self.y_edges[1:] + self.y_edges[:-1])
        return np.meshgrid(xc, yc, indexing="ij")

    def mask(self, predicate):
        X, Y = self.centres
        return np.asarray(predicate(X, Y), dtype=bool)


def graded_edges(breaks, spacings):
    """Piecewise-uniform edge array.

    ``breaks`` are the interval endpoints ``b_0 < b_1 < ... < b_m`` and
    ``spacings[i]`` the target cell size on ``[b_i, b_{i+1}]``; every break
    is an exact edge so that rectangles aligned with breaks are resolved
    without staircase error.
    """
    out = [float(breaks[0])]
    for a, b, h in zip(breaks[:-1], breaks[1:], spacings):
        n = max(1, int(np.ceil((b - a) / h - 1e-9)))
        out.extend(np.linspace(a, b, n + 1)[1:])
    return np.array(out)


@dataclass(frozen=True)
class SubdomainSpec:
    """Cells of the domain ``omega_mask`` and of a subdomain ``d_mask``.

    Faces between ``D`` and ``omega \\ D`` carry Dirichlet conditions
    (``partial^int D``), faces on the domain boundary stay Neumann
    (``partial^ext D``), except grid-border sides named in
    ``dirichlet_sides`` (any of ``"left", "right", "bottom", "top"``).
    """

    omega_mask: np.ndarray
    d_mask: Optional[np.ndarray] = None
    dirichlet_sides: tuple = ()
    simply_connected: bool = False

    def __post_init__(self):
        om = np.asarray(self.omega_mask, dtype=bool)
        if not om.any():
            raise BadMask("empty mask")
        if self.d_mask is not None:
            d = np.asarray(self.d_mask, dtype=bool)
            if d.shape != om.shape or np.any(d & ~om):
                raise BadMask("subdomain must lie inside the domain")
            if not d.any():
                raise BadMask("empty subdomain")
        cells = self.cells
        _, ncomp = ndimage.label(cells)
        if ncomp != 1:
            raise BadMask(f"mask has {ncomp} connected components")

    @property
    def cells(self):
        return np.asarray(self.omega_mask if self.d_mask is None else self.d_mask, dtype=bool)


def assemble_masked(grid, spec, A=None):
    """Five-point operator on the cells selected by ``spec``.

    ``A`` is a planar :class:`OneForm` (``None`` for the plain Laplacian).
    """
    if not isinstance(spec, SubdomainSpec):
        spec = SubdomainSpec(np.asarray(spec, dtype=bool))
    A = OneForm(0.0, 0.0) if A is None else A
    omega = np.asarray(spec.omega_mask, dtype=bool)
    cells = spec.cells
    if omega.shape != grid.shape:
        raise BadMask("mask shape does not match the grid")
    nx, ny = grid.shape
    hx = np.diff(grid.x_edges)
    hy = np.diff(grid.y_edges)
    X, Y = grid.centres
    idx = np.full(grid.shape, -1)
    idx[cells] = np.arange(int(cells.sum()))
    n = int(cells.sum())
    mass = (hx[:, None] * hy[None, :])[cells]
    dirichlet = np.zeros(n)

    P, Q, W, PP, QQ = [], [], [], [], []
    # x-links
    dx = X[1:, :] - X[:-1, :]
    wx = hy[None, :] / dx
    both = cells[1:, :] & cells[:-1, :]
    P.append(idx[:-1, :][both]); Q.append(idx[1:, :][both]); W.append(wx[both])
    PP.append(np.c_[X[:-1, :][both], Y[:-1, :][both]])
    QQ.append(np.c_[X[1:, :][both], Y[1:, :][both]])
    dy = Y[:, 1:] - Y[:, :-1]
    wy = hx[:, None] / dy
    both = cells[:, 1:] & cells[:, :-1]
    P.append(idx[:, :-1][both]); Q.append(idx[:, 1:][both]); W.append(wy[both])
    PP.append(np.c_[X[:, :-1][both], Y[:, :-1][both]])
    QQ.append(np.c_[X[:, 1:][both], Y[:, 1:][both]])

    # Dirichlet faces towards omega \ D
    if spec.d_mask is not None:
        rest = omega & ~cells
        for a, b, wgt in ((cells[:-1, :], rest[1:, :], wx), (cells[1:, :], rest[:-1, :], wx)):
            pass
        sel = cells[:-1, :] & rest[1:, :]
        np.add.at(dirichlet, idx[:-1, :][sel], 2.0 * wx[sel])
        sel = cells[1:, :] & rest[:-1, :]
        np.add.at(dirichlet, idx[1:, :][sel], 2.0 * wx[sel])
        sel = cells[:, :-1] & rest[:, 1:]
        np.add.at(dirichlet, idx[:, :-1][sel], 2.0 * wy[sel])
        sel = cells[:, 1:] & rest[:, :-1]
        np.add.at(dirichlet, idx[:, 1:][sel], 2.0 * wy[sel])
    for side in spec.dirichlet_sides:
        if side == "left":
            sel = cells[0, :]
            np.add.at(dirichlet, idx[0, :][sel], (2.0 * hy / hx[0])[sel])
        elif side == "right":
            sel = cells[-1, :]
            np.add.at(dirichlet, idx[-1, :][sel], (2.0 * hy / hx[-1])[sel])
        elif side == "bottom":
            sel = cells[:, 0]
            np.add.at(dirichlet, idx[:, 0][sel], (2.0 * hx / hy[0])[sel])
        elif side == "top":
            sel = cells[:, -1]
            np.add.at(dirichlet, idx[:, -1][sel], (2.0 * hx / hy[-1])[sel])
        else:
            raise BadMask(f"unknown side {side!r}")

    p, q, w = np.concatenate(P), np.concatenate(Q), np.concatenate(W)
    alpha = A.link_phase(np.concatenate(PP), np.concatenate(QQ))
    points = np.c_[X[cells], Y[cells]]
    meta = {"kind": "masked", "shape": grid.shape,
            "h_min": float(min(hx.min(), hy.min()))}
    return _from_links(n, p, q, w, alpha, mass, dirichlet, points, idx, False, meta)


def euler_characteristic(mask, periodic=False):
    """Euler characteristic ``V - E + F`` of the union of closed raster cells.

    With ``periodic`` the second axis wraps around (annulus rasters).
    """
    M = np.asarray(mask, dtype=bool)
    F = int(M.sum())
    if periodic:
        Mp = np.pad(M, ((1, 1), (0, 0)))
        left = np.roll(Mp, 1, axis=1)
        # edges crossing axis 0 (between rows), positions (rows+1, cols)
        e0 = Mp[:-1, :] | Mp[1:, :]
        # edges between columns: positions (rows, cols) left boundary of column j
        e1 = Mp | left
        e1 = e1[1:-1]
        v = Mp[:-1, :] | Mp[1:, :] | left[:-1, :] | left[1:, :]
        return int(v.sum()) - int(e0.sum()) - int(e1.sum()) + F
    Mp = np.pad(M, 1)
    e0 = Mp[:-1, 1:-1] | Mp[1:, 1:-1]
    e1 = Mp[1:-1, :-1] | Mp[1:-1, 1:]
    v = Mp[:-1, :-1] | Mp[1:, :-1] | Mp[:-1, 1:] | Mp[1:, 1:]
    return int(v.sum()) - int(e0.sum()) - int(e1.sum()) + F
