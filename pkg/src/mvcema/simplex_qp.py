"""Simplex projection and a projected fast gradient method (PFGM).

The QPs solved here have the form

    minimize  x^T Q x - b^T x   subject to  x >= 0, sum(x) = 1

with ``Q`` symmetric. Both alternating updates of the unmixing driver reduce
to batches of such problems.
"""
from dataclasses import dataclass

import numpy as np

from .errors import Diverged, EmptyVector, ValidationError
from .linalg import check_symmetric, spectral_upper_bound

SIMPLEX_TOL = 1e-9
DIVERGENCE_TOL = 1e-6


@dataclass(frozen=True)
class PfgmSettings:
    max_inner_iters: int = 200
    rel_tol: float = 1e-8
    restart_on_nonmonotone: bool = True

    def __post_init__(self):
        if self.max_inner_iters < 1:
            raise ValidationError("max_inner_iters must be >= 1")
        if not self.rel_tol > 0:
            raise ValidationError("rel_tol must be > 0")


@dataclass(frozen=True)
class QpProblem:
    Q: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        Q = check_symmetric(self.Q)
        b = np.asarray(self.b, dtype=float).ravel()
        if b.shape[0] != Q.shape[0]:
            raise ValidationError(f"b has length {b.shape[0]}, Q is {Q.shape}")
        if not np.all(np.isfinite(b)):
            raise ValidationError("b has non-finite entries")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "b", b)

    @property
    def n(self):
        return self.b.shape[0]

    def objective(self, x):
        x = np.asarray(x, dtype=float)
        return float(x @ self.Q @ x - self.b @ x)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return 2.0 * (self.Q @ x) - self.b


def check_simplex_point(x, tol=SIMPLEX_TOL):
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise EmptyVector("empty vector")
    if np.any(x < 0) or abs(x.sum() - 1.0) > tol:
        raise ValidationError("point is not on the probability simplex")
    return x


def project_rows(V):
    """Project every row of ``V`` onto the probability simplex.

    Sort-and-threshold: with ``u`` sorted descending, the support size is the
    number of indices where ``u_j - (cumsum(u)_j - 1) / j > 0`` (strict), and
    the threshold is taken from that sorted prefix, so ties are deterministic.
    """
    V = np.asarray(V, dtype=float)
    n = V.shape[1]
    U = -np.sort(-V, axis=1)
    css = np.cumsum(U, axis=1) - 1.0
    ind = np.arange(1, n + 1)
    rho = np.count_nonzero(U - css / ind > 0, axis=1)
    theta = css[np.arange(V.shape[0]), rho - 1] / rho
    return np.maximum(V - theta[:, None], 0.0)


def project_simplex(v):
    """Euclidean projection of ``v`` onto ``{x >= 0, sum(x) = 1}``."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        raise EmptyVector("cannot project an empty vector")
    if not np.all(np.isfinite(v)):
        raise ValidationError("vector has non-finite entries")
    return project_rows(v[None, :])[0]


def _row_objective(X, XQ, B):
    return np.einsum("ij,ij->i", X, XQ) - np.einsum("ij,ij->i", B, X)


def pfgm_rows(apply_q, B, X0, lipschitz, settings=PfgmSettings()):
    """Run PFGM on a batch of independent simplex QPs.

    Row ``i`` solves ``min x Q x^T - B[i] x^T`` starting from ``X0[i]``; ``apply_q``
    maps a row batch ``X`` to ``X @ Q``. Momentum, restarts and the stopping
    test are tracked per row, so each row's result does not depend on which
    other rows share the batch. Returns ``(X, iterations_per_row)``.
    """
    X = np.array(X0, dtype=float, copy=True)
    B = np.asarray(B, dtype=float)
    m = X.shape[0]
    step = 1.0 / max(lipschitz, 1e-300)

    Y = X.copy()
    t = np.ones(m)
    fx = _row_objective(X, apply_q(X), B)
    iters = np.zeros(m, dtype=int)
    active = np.ones(m, dtype=bool)

    for _ in range(settings.max_inner_iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Xa, Ya, Ba, ta = X[idx], Y[idx], B[idx], t[idx]

        Xn = project_rows(Ya - step * (2.0 * apply_q(Ya) - Ba))
        fn = _row_objective(Xn, apply_q(Xn), Ba)

        if settings.restart_on_nonmonotone:
            # no strict decrease counts too: momentum can land back on the same
            # vertex, which would otherwise look like convergence
            bad = fn >= fx[idx]
            if np.any(bad):
                # restart: drop momentum and take a plain projected gradient step
                Xb = Xa[bad]
                Xr = project_rows(Xb - step * (2.0 * apply_q(Xb) - Ba[bad]))
                fr = _row_objective(Xr, apply_q(Xr), Ba[bad])
                stuck = fr >= fx[idx][bad]
                Xr[stuck] = Xb[stuck]
                fr[stuck] = fx[idx][bad][stuck]
                Xn[bad] = Xr
                fn[bad] = fr
                ta = ta.copy()
                ta[bad] = 1.0

        tn = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * ta * ta))
        Y[idx] = Xn + ((ta - 1.0) / tn)[:, None] * (Xn - Xa)
        change = np.linalg.norm(Xn - Xa, axis=1) / np.maximum(np.linalg.norm(Xa, axis=1), 1e-300)

        X[idx] = Xn
        fx[idx] = fn
        t[idx] = tn
        iters[idx] += 1
        active[idx[change < settings.rel_tol]] = False

    return X, iters


def solve_qp_simplex(problem, x0, settings=PfgmSettings(), lipschitz=None):
    """Solve one simplex-constrained QP by PFGM with function-value restart.

    The step is ``1 / L`` with ``L`` an upper bound on the largest eigenvalue
    of ``2 Q`` unless ``lipschitz`` is supplied. Returns ``(x, iterations)``.
    Raises ``Diverged`` if the final objective exceeds the starting one by
    more than 1e-6.
    """
    x0 = check_simplex_point(x0)
    if x0.shape[0] != problem.n:
        raise ValidationError(f"x0 has length {x0.shape[0]}, problem has n={problem.n}")
    if lipschitz is None:
        lipschitz = spectral_upper_bound(2.0 * problem.Q)
    Q = problem.Q
    X, iters = pfgm_rows(lambda X: X @ Q, problem.b[None, :], x0[None, :], lipschitz, settings)
    x = X[0]
    f0, f1 = problem.objective(x0), problem.objective(x)
    if f1 > f0 + DIVERGENCE_TOL:
        raise Diverged(f"objective rose from {f0:.6g} to {f1:.6g}")
    return x, int(iters[0])
