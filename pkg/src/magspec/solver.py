"""Smallest eigenpairs of a Hermitian pencil ``(S, M)`` with diagonal ``M``.

Block inverse iteration: each sweep applies ``(S - sigma M)^{-1} M`` to a
block of ``k + 3`` vectors through one sparse LU factorization, then runs
Rayleigh-Ritz on the block.  The small negative shift keeps the factorization
regular when ``S`` has a kernel (integer flux).
"""

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sl
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import BadOperator, SolverStalled

DEFAULT_TOL = 1e-8
MAX_ITER = 500
CLUSTER_GAP = 1e-6
SEED = 20240601


@dataclass
class SpectrumResult:
    """Ascending eigenvalues with M-orthonormal eigenvectors (columns).

    ``residuals[i]`` is ``||S x - lambda M x||_{M^-1} / ||x||_M`` divided by
    ``max(|lambda|, 1)``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    iterations: int
    wall_time: float
    converged: bool
    tol: float
    sigma: float
    multiplicities: list = field(default_factory=list)

    @property
    def lambda1(self):
        return float(self.eigenvalues[0])

    def stats(self):
        return {"iterations": self.iterations, "wall_time": self.wall_time,
                "max_residual": float(np.max(self.residuals)), "converged": self.converged}


def cluster_sizes(values, rel_gap=CLUSTER_GAP, abs_floor=1e-10):
    """Sizes of runs of consecutive values closer than ``rel_gap`` (relative)."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return []
    sizes = [1]
    for a, b in zip(values[:-1], values[1:]):
        if b - a <= rel_gap * max(abs(b), abs(a)) + abs_floor:
            sizes[-1] += 1
        else:
            sizes.append(1)
    return sizes


def _unpack(S, M):
    if hasattr(S, "stiffness"):
        S, M = S.stiffness, S.mass if M is None else M
    S = sp.csr_matrix(S, dtype=complex)
    if sp.issparse(M):
        m = M.diagonal()
        if (M - sp.diags(m)).count_nonzero():
            raise BadOperator("mass matrix must be diagonal")
    else:
        m = np.asarray(M, dtype=float)
        if m.ndim == 2:
            if np.any(m - np.diag(np.diag(m))):
                raise BadOperator("mass matrix must be diagonal")
            m = np.diag(m)
    m = np.real(np.asarray(m)).astype(float)
    if S.shape[0] != S.shape[1] or S.shape[0] != m.size:
        raise BadOperator("shape mismatch between S and M")
    if np.any(m <= 0) or not np.all(np.isfinite(m)):
        raise BadOperator("mass must be positive and finite")
    if not np.all(np.isfinite(S.data)):
        raise BadOperator("non-finite stiffness entries")
    scale = float(abs(S).max()) if S.nnz else 1.0
    d = S - S.conj().T
    if d.nnz and abs(d).max() > 1e-12 * max(scale, 1.0):
        raise BadOperator("stiffness is not Hermitian")
    return S, m


def _m_orthonormalize(Y, sqm):
    Q, R = np.linalg.qr(sqm[:, None] * Y)
    keep = np.abs(np.diag(R)) > 1e-13 * np.abs(np.diag(R)).max()
    return Q[:, keep] / sqm[:, None]


def smallest_eigenpairs(S, M=None, k=1, tol=DEFAULT_TOL, max_iter=MAX_ITER, seed=SEED,
                        known_vectors=None):
    """``k`` smallest eigenpairs of ``S x = lambda M x``.

    ``S`` may also be a :class:`~magspec.operators.DiscreteMagneticOperator`
    (then ``M`` defaults to its mass).  ``M`` is a positive vector or a
    diagonal matrix.
    """
    t0 = time.perf_counter()
    S, m = _unpack(S, M)
    n = m.size
    k = int(k)
    if k < 1:
        raise ValueError("k must be >= 1")
    Yk = None
    if known_vectors is not None and len(known_vectors):
        Yk = np.atleast_2d(np.asarray(known_vectors, dtype=complex))
        if Yk.shape[0] != n:
            Yk = Yk.T
        Yk = _m_orthonormalize(Yk, np.sqrt(m))
    n_free = n - (0 if Yk is None else Yk.shape[1])
    if k > n_free:
        raise ValueError("k exceeds the problem size")
    b = min(k + 3, n_free)

    def deflate(X):
        if Yk is None:
            return X
        return X - Yk @ (Yk.conj().T @ (m[:, None] * X))

    # median rather than max: strongly graded grids have a few very stiff cells
    scale = float(np.median(np.real(S.diagonal()) / m))
    sigma = -1e-6 * max(scale, 1e-300)
    lu = splu((S - sigma * sp.diags(m)).tocsc())
    sqm = np.sqrt(m)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, b)) + 1j * rng.standard_normal((n, b))
    X = _m_orthonormalize(deflate(X), sqm)

    vals = res = None
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        Y = lu.solve(m[:, None] * X)
        Y = _m_orthonormalize(deflate(Y), sqm)
        SY = S @ Y
        H = Y.conj().T @ SY
        H = 0.5 * (H + H.conj().T)
        w, V = sl.eigh(H)
        X = Y @ V
        SX = SY @ V
        vals = w[:k]
        R = SX[:, :k] - (m[:, None] * X[:, :k]) * vals[None, :]
        res = np.linalg.norm(R / sqm[:, None], axis=0) / np.maximum(np.abs(vals), 1.0)
        if np.all(res <= tol):
            converged = True
            break
    result = SpectrumResult(
        eigenvalues=np.asarray(vals, dtype=float), eigenvectors=X[:, :k], residuals=res,
        iterations=it, wall_time=time.perf_counter() - t0, converged=converged, tol=tol,
        sigma=sigma, multiplicities=cluster_sizes(vals))
    if not converged:
        raise SolverStalled(f"no convergence after {max_iter} iterations "
                            f"(max residual {np.max(res):.3e})", result)
    return result


def deflated_solve(S, M=None, k=1, known_vectors=(), tol=DEFAULT_TOL, **kw):
    """As :func:`smallest_eigenpairs`, restricted to the M-orthogonal
    complement of ``known_vectors`` (columns or a list of vectors)."""
    kv = None
    if known_vectors is not None and len(known_vectors):
        kv = np.asarray(known_vectors, dtype=complex)
        if kv.ndim == 1:
            kv = kv[:, None]
    return smallest_eigenpairs(S, M, k, tol, known_vectors=kv, **kw)
