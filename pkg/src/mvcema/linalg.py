"""Dense linear-algebra kernels used by the solver.

All functions are pure and operate on numpy arrays; nothing here keeps state.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import NonSymmetric, RankDeficient, ValidationError

SYMMETRY_TOL = 1e-10
RANK_TOL = 1e-10
DET_FLOOR = 1e-12


def as_matrix(A, name="matrix"):
    """Validate and return ``A`` as a finite 2-D float array."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ValidationError(f"{name} must be a non-empty 2-D array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValidationError(f"{name} has non-finite entries")
    return A


def check_symmetric(S, tol=SYMMETRY_TOL):
    S = as_matrix(S)
    if S.shape[0] != S.shape[1]:
        raise NonSymmetric(f"matrix is not square: {S.shape}")
    scale = max(1.0, float(np.max(np.abs(S))))
    err = float(np.max(np.abs(S - S.T)))
    if err > tol * scale:
        raise NonSymmetric(f"asymmetry {err:.3g} exceeds {tol:g}")
    return S


@dataclass(frozen=True)
class NullSpaceBasis:
    """Orthonormal basis of the kernel of a ``source_rows x ambient_dim`` matrix."""
    source_rows: int
    ambient_dim: int
    basis: np.ndarray

    @property
    def dim(self):
        return self.basis.shape[1]

    def projector(self):
        """``C @ C.T``: orthogonal projector onto the kernel."""
        return self.basis @ self.basis.T


def gram(A):
    """Return ``A @ A.T`` (exactly symmetric)."""
    A = as_matrix(A)
    S = A @ A.T
    return 0.5 * (S + S.T)


def det_psd(S):
    """Determinant of a symmetric positive semidefinite matrix.

    Uses a Cholesky factorization, and falls back to a pivoted LDL^T
    factorization when the matrix is singular or slightly indefinite from
    rounding. Tiny negative results are clamped to zero.
    """
    S = check_symmetric(S)
    try:
        c = np.linalg.cholesky(S)
        det = float(np.prod(np.diag(c)) ** 2)
    except np.linalg.LinAlgError:
        _, d, _ = sla.ldl(S)
        det = float(np.linalg.det(d))   # d is block diagonal with 1x1/2x2 blocks
    if -DET_FLOOR < det < 0.0:
        det = 0.0
    return det


def null_space(A):
    """Orthonormal basis of the null space of a full-row-rank ``A`` (rows < cols).

    Computed from the full SVD; the rank test uses singular values relative
    to the largest one.
    """
    A = as_matrix(A)
    m, n = A.shape
    if m >= n:
        raise ValidationError(f"null_space needs rows < cols, got {A.shape}")
    _, s, vt = np.linalg.svd(A, full_matrices=True)
    if s[-1] <= RANK_TOL * s[0]:
        rank = int(np.sum(s > RANK_TOL * s[0]))
        raise RankDeficient(f"row rank {rank} < {m}")
    return NullSpaceBasis(source_rows=m, ambient_dim=n, basis=vt[m:].T.copy())


def spectral_upper_bound(S):
    """Upper bound on the largest eigenvalue of symmetric ``S``.

    This is the exact largest eigenvalue (``eigvalsh``) nudged up by a
    relative 1e-12 so that rounding never lets it fall below the true value.
    """
    S = check_symmetric(S)
    lmax = float(np.linalg.eigvalsh(S)[-1])
    return lmax + 1e-12 * max(abs(lmax), 1e-300)


def volume_factors(G, k):
    """Split ``det(G G^T)`` around row ``k``.

    Returns ``(det(Gb Gb^T), g_k C C^T g_k^T)`` where ``Gb`` is ``G`` without
    row ``k`` and ``C`` an orthonormal basis of ``Null(Gb)``. Their product
    equals ``det(G G^T)``.
    """
    G = as_matrix(G, "G")
    rest = np.delete(G, k, axis=0)
    gk = G[k]
    C = null_space(rest).basis
    proj = C.T @ gk
    return det_psd(gram(rest)), float(proj @ proj)
