"""Angular error metrics, permutation alignment, volume and cone diagnostics."""
import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment, nnls

from .errors import ValidationError, ZeroRow
from .linalg import as_matrix, det_psd, gram

EXHAUSTIVE_MAX_K = 8
SSC_TOL = 1e-8
COS_SNAP = 1e-12


def _degrees(c):
    # dot products overshoot; cosines within 1e-12 of +-1 are treated as exact
    c = np.where(np.abs(np.abs(c) - 1.0) <= COS_SNAP, np.sign(c), c)
    return np.degrees(np.arccos(np.clip(c, -1.0, 1.0)))


def _row_angles(A, B):
    """Angle in degrees between matching rows of ``A`` and ``B``."""
    A = as_matrix(A)
    B = as_matrix(B)
    if A.shape != B.shape:
        raise ValidationError(f"shape mismatch {A.shape} vs {B.shape}")
    na = np.linalg.norm(A, axis=1)
    nb = np.linalg.norm(B, axis=1)
    zero = np.flatnonzero((na == 0) | (nb == 0))
    if zero.size:
        raise ZeroRow(f"row {int(zero[0])} has zero norm")
    return _degrees(np.einsum("ij,ij->i", A, B) / (na * nb))


def angle_matrix(A, B):
    """``D[k, l]`` = angle in degrees between row ``k`` of ``A`` and row ``l`` of ``B``."""
    A = as_matrix(A)
    B = as_matrix(B)
    na = np.linalg.norm(A, axis=1)
    nb = np.linalg.norm(B, axis=1)
    if np.any(na == 0) or np.any(nb == 0):
        raise ZeroRow("zero-norm row")
    return _degrees((A @ B.T) / np.outer(na, nb))


def maem(G_true, G_est_aligned):
    """Mean angle (degrees) between true and estimated end members."""
    return float(np.mean(_row_angles(G_true, G_est_aligned)))


def maab(W_true, W_est_aligned):
    """Mean angle (degrees) between true and estimated abundance rows."""
    return float(np.mean(_row_angles(W_true, W_est_aligned)))


def volume(G):
    return det_psd(gram(G))


@dataclass(frozen=True)
class AlignedPair:
    permutation: tuple      # permutation[k] = estimate row matched to true row k
    aligned_G: np.ndarray
    aligned_W: np.ndarray
    total_deviation: float


def best_permutation(D):
    """Permutation minimizing ``sum_k D[k, perm[k]]``.

    Exhaustive for K <= 8 with ties going to the lexicographically first
    permutation; Hungarian assignment beyond that.
    """
    K = D.shape[0]
    if K > EXHAUSTIVE_MAX_K:
        _, cols = linear_sum_assignment(D)
        return tuple(int(c) for c in cols)
    rows = np.arange(K)
    best, best_cost = None, np.inf
    for perm in itertools.permutations(range(K)):
        cost = float(D[rows, perm].sum())
        if cost < best_cost:
            best, best_cost = perm, cost
    return tuple(best)


def align(G_true, G_est, W_est):
    """Match estimated end members to true ones by total angular deviation."""
    G_true = as_matrix(G_true, "G_true")
    G_est = as_matrix(G_est, "G_est")
    W_est = as_matrix(W_est, "W_est")
    if G_true.shape != G_est.shape or W_est.shape[1] != G_est.shape[0]:
        raise ValidationError("inconsistent shapes for alignment")
    D = angle_matrix(G_true, G_est)
    perm = best_permutation(D)
    idx = list(perm)
    return AlignedPair(perm, G_est[idx].copy(), W_est[:, idx].copy(),
                       float(D[np.arange(len(idx)), idx].sum()))


@dataclass(frozen=True)
class SscReport:
    n_samples: int
    violations: int
    max_violation: float
    verdict: str            # "pass" | "fail" | "inconclusive"
    note: str = ""


def cone_boundary_samples(K, n_samples, seed):
    """Points on ``{x >= 0 : 1^T x = sqrt(K-1) ||x||}`` scaled to ``1^T x = 1``.

    The boundary circle around the axis has radius ``1/sqrt(K(K-1))``, which
    is the inradius of the unit simplex, so every sample is nonnegative.
    """
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((n_samples, K))
    U -= U.mean(axis=1, keepdims=True)
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    X = 1.0 / K + U / np.sqrt(K * (K - 1))
    return np.maximum(X, 0.0)


def check_ssc1(G, n_samples=1000, seed=0):
    """Necessary-condition check that the second-order cone lies in cone(G).

    ``cone(G)`` is spanned by the J columns of ``G``. Each sampled boundary
    point is tested by nonnegative least squares; a residual above 1e-8 is a
    violation. Passing is evidence, not proof.
    """
    G = as_matrix(G, "G")
    K = G.shape[0]
    if K < 2:
        raise ValidationError("need K >= 2")
    X = cone_boundary_samples(K, n_samples, seed)
    worst, bad = 0.0, 0
    for x in X:
        _, r = nnls(G, x)
        worst = max(worst, r)
        bad += r >= SSC_TOL
    return SscReport(n_samples, int(bad), float(worst), "fail" if bad else "pass")


def check_ssc2(G):
    """No algorithm is available for the second condition; always inconclusive."""
    as_matrix(G, "G")
    return SscReport(0, 0, 0.0, "inconclusive", "second scattering condition is not checked")
