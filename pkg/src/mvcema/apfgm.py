"""Alternating projected fast gradient driver for volume-regularized EMA.

Model: ``P ~ W G`` with ``W`` (I x K) and ``G`` (K x J) both row-stochastic.
The driver minimizes

    J(W, G) = 1/2 ||P - W G||_F^2 - lam/2 det(G G^T)

by alternating a W block (I independent simplex QPs sharing ``1/2 G G^T``)
and a G block (K row QPs solved in order, each using the latest rows).
``lam > 0`` favours end members that are far apart, ``lam < 0`` favours
tight ones, ``lam = 0`` is plain EMA.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (DegenerateInitVolume, IndefiniteQk, InitRankFailure, NegativeEntry,
                     NumericalError, RankDeficient, RowSumOutOfTolerance, ValidationError,
                     with_iteration)
from .linalg import as_matrix, det_psd, gram, null_space, spectral_upper_bound, volume_factors
from .simplex_qp import PfgmSettings, QpProblem, pfgm_rows, project_rows, solve_qp_simplex

log = logging.getLogger(__name__)

INGEST_TOL = 1e-6
EXACT_TOL = 1e-12
FEASIBLE_TOL = 1e-9
DET0_FLOOR = 1e-14
PD_FLOOR = 1e-12
INIT_RESAMPLES = 10
RANK_RETRIES = 3
RANK_NOISE = 1e-8


@dataclass(frozen=True)
class GsdMatrix:
    """Nonnegative row-stochastic data matrix (specimens x bins).

    Rows within 1e-6 of summing to one are rescaled so they sum to one to
    1e-12; rows further out are rejected.
    """
    data: np.ndarray

    def __post_init__(self):
        P = np.array(as_matrix(self.data, "P"), dtype=float, copy=True)
        neg = np.argwhere(P < 0)
        if neg.size:
            i, j = neg[0]
            raise NegativeEntry(int(i) + 1, int(j) + 1)
        sums = P.sum(axis=1)
        off = np.abs(sums - 1.0)
        bad = np.flatnonzero(off > INGEST_TOL)
        if bad.size:
            raise RowSumOutOfTolerance(int(bad[0]) + 1, float(sums[bad[0]]))
        fix = off > EXACT_TOL
        P[fix] /= sums[fix][:, None]
        P.setflags(write=False)
        object.__setattr__(self, "data", P)

    @classmethod
    def coerce(cls, P):
        return P if isinstance(P, cls) else cls(P)

    @property
    def specimens(self):
        return self.data.shape[0]

    @property
    def bins(self):
        return self.data.shape[1]


@dataclass(frozen=True)
class Factorization:
    W: np.ndarray
    G: np.ndarray

    @property
    def K(self):
        return self.G.shape[0]

    def product(self):
        return self.W @ self.G

    def violations(self, tol=FEASIBLE_TOL):
        """Largest constraint violation of either factor (0.0 when feasible)."""
        worst = 0.0
        for M in (self.W, self.G):
            worst = max(worst, float(max(0.0, -M.min())), float(np.max(np.abs(M.sum(axis=1) - 1.0))))
        return worst

    def is_feasible(self, tol=FEASIBLE_TOL):
        return (self.W.min() >= 0 and self.G.min() >= 0
                and np.all(np.abs(self.W.sum(axis=1) - 1.0) <= tol)
                and np.all(np.abs(self.G.sum(axis=1) - 1.0) <= tol))


@dataclass(frozen=True)
class VolumeConfig:
    lambda_prime: float
    lam: float
    residual0: float
    det0: float

    @property
    def mode(self):
        if self.lam > 0:
            return "max-volume"
        if self.lam < 0:
            return "min-volume"
        return "no-volume"


@dataclass(frozen=True)
class OuterSettings:
    """Outer-loop settings.

    ``curvature_cap`` bounds the volume weight actually used: before each G
    sweep the weight in force is reduced (never increased) so that
    ``|lam| * det(Gb_k Gb_k^T) <= curvature_cap * I / K**2`` for every k.
    ``init`` picks the starting end members: ``"spa"`` uses extreme specimens
    found by successive projection, ``"flat"`` uses flat Dirichlet draws.
    """
    maxiter: int = 500
    rel_tol: float = 1e-9
    patience: int = 5
    threads: int = 1
    curvature_cap: float = 0.01
    init: str = "spa"
    check_every: int = 0
    inner: PfgmSettings = field(default_factory=PfgmSettings)

    def __post_init__(self):
        if self.maxiter < 0:
            raise ValidationError("maxiter must be >= 0")
        if not self.rel_tol > 0:
            raise ValidationError("rel_tol must be > 0")
        if self.patience < 1:
            raise ValidationError("patience must be >= 1")
        if self.threads < 1:
            raise ValidationError("threads must be >= 1")
        if not self.curvature_cap > 0:
            raise ValidationError("curvature_cap must be > 0")
        if self.init not in ("spa", "flat"):
            raise ValidationError(f"unknown init {self.init!r}")


@dataclass
class RunReport:
    volume: VolumeConfig
    initial_residual: float
    initial_det: float
    objective: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    det: list = field(default_factory=list)
    lam: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)
    iterations: int = 0
    wall_time: float = 0.0
    termination: str = "maxiter"

    @property
    def lam_in_force(self):
        return self.lam[-1] if self.lam else self.volume.lam

    def previous_objective(self, t):
        """Objective of the state before iteration ``t`` (0-based) under the weight used in ``t``."""
        res = self.initial_residual if t == 0 else self.residual[t - 1]
        det = self.initial_det if t == 0 else self.det[t - 1]
        return 0.5 * res - 0.5 * self.lam[t] * det

    def descent_violations(self, tol=1e-10):
        """Iterations whose objective rose by more than ``tol`` (relative when |J| > 1)."""
        bad = []
        for t, obj in enumerate(self.objective):
            prev = self.previous_objective(t)
            if obj > prev + tol * max(1.0, abs(prev)):
                bad.append(t)
        return bad


def objective(P, F, lam):
    R = P - F.W @ F.G
    return 0.5 * float(np.sum(R * R)) - 0.5 * lam * volume_of(F.G)


def volume_of(G):
    return det_psd(gram(G))


def residual_of(P, F):
    R = P - F.W @ F.G
    return float(np.sum(R * R))


def _flat_rows(rng, n, d):
    X = rng.dirichlet(np.ones(d), size=n)
    return X / X.sum(axis=1, keepdims=True)


def _full_row_rank(G):
    s = np.linalg.svd(G, compute_uv=False)
    return s[-1] > 1e-10 * s[0]


def spa_select(P, K):
    """Indices of ``K`` extreme rows of ``P`` by successive projection, or None."""
    R = np.array(P, dtype=float, copy=True)
    picked = []
    for _ in range(K):
        norms = np.einsum("ij,ij->i", R, R)
        j = int(np.argmax(norms))
        if norms[j] <= 1e-20 * max(1.0, float(np.max(np.einsum("ij,ij->i", P, P)))):
            return None
        u = R[j] / np.sqrt(norms[j])
        R -= np.outer(R @ u, u)
        picked.append(j)
    return picked


def initialize(P, K, seed, method="spa"):
    """Feasible starting factors, deterministic in ``seed``.

    ``W0`` rows are flat Dirichlet draws. ``G0`` is either ``K`` extreme
    specimens of ``P`` (``method="spa"``, falling back to flat draws if those
    rows are rank deficient) or flat Dirichlet draws (``method="flat"``),
    redrawn up to 10 times until it has full row rank.
    """
    P = GsdMatrix.coerce(P).data
    I, J = P.shape
    if K < 2 or K > min(I, J):
        raise ValidationError(f"K must satisfy 2 <= K <= min(I, J) = {min(I, J)}, got {K}")
    rng = np.random.default_rng(seed)
    W = _flat_rows(rng, I, K)
    if method == "spa":
        idx = spa_select(P, K)
        if idx is not None:
            G = P[idx].copy()
            if _full_row_rank(G):
                return Factorization(W, G)
        log.warning("extreme-specimen start is rank deficient; drawing G0 at random")
    elif method != "flat":
        raise ValidationError(f"unknown init method {method!r}")
    for _ in range(1 + INIT_RESAMPLES):
        G = _flat_rows(rng, K, J)
        if _full_row_rank(G):
            return Factorization(W, G)
    raise InitRankFailure(f"no full-rank G0 after {INIT_RESAMPLES} resamples")


def scale_lambda(P, F0, lambda_prime):
    """Volume weight ``lam = lambda_prime * ||P - W0 G0||_F^2 / det(G0 G0^T)``."""
    P = GsdMatrix.coerce(P).data
    res0 = residual_of(P, F0)
    det0 = volume_of(F0.G)
    lambda_prime = float(lambda_prime)
    if lambda_prime == 0.0:
        return VolumeConfig(0.0, 0.0, res0, det0)
    if det0 <= DET0_FLOOR:
        raise DegenerateInitVolume(f"det(G0 G0^T) = {det0:.3g} is below {DET0_FLOOR:g}")
    return VolumeConfig(lambda_prime, lambda_prime * res0 / det0, res0, det0)


def update_w(P, F, settings=PfgmSettings(), threads=1):
    """Re-solve every abundance row with ``G`` fixed.

    Row ``i`` minimizes ``w (1/2 G G^T) w^T - P[i] G^T w^T`` over the simplex,
    warm-started from the current row. Rows are independent, so they may be
    split over ``threads`` workers without changing the result.
    """
    P = GsdMatrix.coerce(P).data
    W, G = F.W, F.G
    Q = 0.5 * gram(G)
    B = P @ G.T
    L = spectral_upper_bound(2.0 * Q)

    def apply_q(X):
        return np.einsum("ik,kl->il", X, Q)

    if threads <= 1 or W.shape[0] < 2:
        Wn, _ = pfgm_rows(apply_q, B, W, L, settings)
    else:
        chunks = np.array_split(np.arange(W.shape[0]), threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: pfgm_rows(apply_q, B[c], W[c], L, settings)[0], chunks))
        Wn = np.vstack(parts)
    return Factorization(Wn, G)


def g_quadratic(W, G, R, k, lam):
    """Quadratic model of the objective in row ``k`` of ``G``.

    ``R`` is the current residual ``P - W G``. Returns ``(Q, b, a, shrink)``
    where ``Q = 1/2 a I - 1/2 shrink C C^T`` with ``a = |W_k|^2``,
    ``shrink = lam det(Gb Gb^T)`` and ``C`` spanning the null space of ``G``
    without row ``k``. ``Q`` has eigenvalue ``a / 2`` on the row space of the
    other rows and ``(a - shrink) / 2`` on ``C``.
    """
    wk = W[:, k]
    rest = np.delete(G, k, axis=0)
    C = null_space(rest).basis
    a = float(wk @ wk)
    shrink = lam * det_psd(gram(rest))
    Q = 0.5 * a * np.eye(G.shape[1]) - 0.5 * shrink * (C @ C.T)
    b = wk @ (R + np.outer(wk, G[k]))
    return Q, b, a, shrink


def g_subproblem(W, G, R, k, lam):
    """Positive-definite row QP for ``G[k]``: returns ``(QpProblem, lipschitz)``."""
    Q, b, a, shrink = g_quadratic(W, G, R, k, lam)
    min_eig = 0.5 * min(a, a - shrink)
    if min_eig <= PD_FLOOR:
        raise IndefiniteQk(k, min_eig)
    return QpProblem(Q, b), max(a, a - shrink) * (1.0 + 1e-12)


def update_g(P, F, vc, settings=PfgmSettings(), lam=None):
    """Update the end-member rows one after another, each with the latest ``G``.

    ``lam`` overrides the weight in ``vc`` (the driver passes the weight in
    force). Raises ``IndefiniteQk`` or ``RankDeficient`` without modifying ``F``.
    """
    P = GsdMatrix.coerce(P).data
    lam = vc.lam if lam is None else lam
    W = F.W
    G = np.array(F.G, copy=True)
    R = P - W @ G
    for k in range(G.shape[0]):
        problem, lipschitz = g_subproblem(W, G, R, k, lam)
        x, _ = solve_qp_simplex(problem, G[k], settings, lipschitz=lipschitz)
        R += np.outer(W[:, k], G[k] - x)
        G[k] = x
    return Factorization(W, G)


def _max_rest_volume(G):
    return max(det_psd(gram(np.delete(G, k, axis=0))) for k in range(G.shape[0]))


def expansion_identity_error(G):
    """Largest relative error of ``det(GG^T) = det(Gb Gb^T) * g_k C C^T g_k^T`` over k."""
    full = volume_of(G)
    worst = 0.0
    for k in range(G.shape[0]):
        d, q = volume_factors(G, k)
        worst = max(worst, abs(d * q - full) / max(abs(full), 1e-300))
    return worst


def run_apfgm(P, K, lambda_prime, seed, outer=OuterSettings(),
              callback: Optional[Callable] = None):
    """Run the alternating solver. Returns ``(Factorization, RunReport)``.

    ``callback(t, F, report)`` is invoked after every completed outer
    iteration ``t`` (1-based).
    """
    P = GsdMatrix.coerce(P)
    data = P.data
    I = data.shape[0]
    F = initialize(P, K, seed, outer.init)
    vc = scale_lambda(P, F, lambda_prime)
    report = RunReport(volume=vc, initial_residual=residual_of(data, F), initial_det=volume_of(F.G))
    lam = vc.lam
    cap = outer.curvature_cap * I / K ** 2
    noise = np.random.default_rng([int(seed), 7919])
    streak = 0
    start = time.perf_counter()

    for t in range(1, outer.maxiter + 1):
        try:
            F = update_w(data, F, outer.inner, outer.threads)
            if lam != 0.0:
                dmax = _max_rest_volume(F.G)
                if abs(lam) * dmax > cap:
                    lam = np.sign(lam) * cap / dmax
                    report.warnings.append(f"iteration {t}: volume weight capped to {lam:.6g}")
                    log.debug("iteration %d: volume weight capped to %.6g", t, lam)
            rank_tries = 0
            while True:
                try:
                    F = update_g(data, F, vc, outer.inner, lam=lam)
                    break
                except IndefiniteQk as err:
                    lam *= 0.5
                    msg = f"iteration {t}: {err}; volume weight halved to {lam:.6g}"
                    report.warnings.append(msg)
                    log.warning(msg)
                except RankDeficient:
                    rank_tries += 1
                    if rank_tries > RANK_RETRIES:
                        raise
                    G = project_rows(F.G + RANK_NOISE * noise.standard_normal(F.G.shape))
                    F = Factorization(F.W, G)
                    msg = f"iteration {t}: rank-deficient end members perturbed (attempt {rank_tries})"
                    report.warnings.append(msg)
                    log.warning(msg)
        except NumericalError as err:
            raise with_iteration(err, t)

        res = residual_of(data, F)
        det = volume_of(F.G)
        obj = 0.5 * res - 0.5 * lam * det
        report.residual.append(res)
        report.det.append(det)
        report.lam.append(float(lam))
        report.objective.append(obj)
        report.iterations = t
        if outer.check_every and t % outer.check_every == 0:
            report.checkpoints.append((t, expansion_identity_error(F.G)))
        if callback is not None:
            callback(t, F, report)

        prev = report.previous_objective(t - 1)
        if abs(prev - obj) <= outer.rel_tol * max(abs(prev), 1e-300):
            streak += 1
            if streak >= outer.patience:
                report.termination = "tolerance"
                break
        else:
            streak = 0

    report.wall_time = time.perf_counter() - start
    return F, report
