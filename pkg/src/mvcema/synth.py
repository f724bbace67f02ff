"""Synthetic grain-size data: lognormal end members mixed with floored abundances."""
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateSpec, InfeasibleFloor, ValidationError
from .linalg import as_matrix

MIN_SEPARATION_DEG = 1.0


def default_grid(n_bins=100, lo=0.5, hi=2000.0):
    """Log-spaced bin centres (micrometres)."""
    return np.geomspace(lo, hi, n_bins)


@dataclass(frozen=True)
class LognormalEmSpec:
    log_mean: float
    log_sigma: float
    grid: tuple

    def __post_init__(self):
        grid = tuple(float(x) for x in self.grid)
        if not self.log_sigma > 0:
            raise ValidationError("log_sigma must be > 0")
        if len(grid) < 2 or any(x <= 0 for x in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValidationError("grid must be increasing positive bin centres")
        object.__setattr__(self, "grid", grid)

    @classmethod
    def from_mode(cls, mode, log_sigma, grid):
        """Spec whose density, sampled per bin centre, peaks at ``mode``."""
        # with the 1/x factor the sampled density is a Gaussian in log size centred at log_mean - sigma^2
        return cls(float(np.log(mode) + log_sigma ** 2), log_sigma, tuple(grid))

    def density(self):
        x = np.asarray(self.grid)
        z = (np.log(x) - self.log_mean) / self.log_sigma
        return np.exp(-0.5 * z * z) / x


@dataclass(frozen=True)
class MixingSpec:
    n_specimens: int
    min_abundance: float = 0.0
    seed: int = 0
    noise_sd: float = 0.0

    def __post_init__(self):
        if self.n_specimens < 1:
            raise ValidationError("n_specimens must be >= 1")
        if self.min_abundance < 0:
            raise ValidationError("min_abundance must be >= 0")
        if self.noise_sd < 0:
            raise ValidationError("noise_sd must be >= 0")


def default_em_specs(grid=None):
    """Three end members with modes at 4, 30 and 250 on a 100-bin grid."""
    grid = default_grid() if grid is None else grid
    return [LognormalEmSpec.from_mode(m, 0.5, grid) for m in (4.0, 30.0, 250.0)]


def two_source_em_specs(grid=None):
    """Two overlapping end members with modes at 8 and 80."""
    grid = default_grid() if grid is None else grid
    return [LognormalEmSpec.from_mode(m, 0.45, grid) for m in (8.0, 80.0)]


def angular_separation(a, b):
    c = float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))
    return float(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))


def make_end_members(specs: Sequence[LognormalEmSpec]):
    """Row-stochastic K x J matrix of lognormal densities on a shared grid."""
    if len(specs) < 2:
        raise ValidationError("need at least two end-member specs")
    grid = specs[0].grid
    if any(s.grid != grid for s in specs):
        raise ValidationError("end-member specs must share one grid")
    rows = []
    for s in specs:
        d = s.density()
        total = d.sum()
        if not total > 0:
            raise DegenerateSpec(f"end member with log_mean {s.log_mean} has no mass on the grid")
        rows.append(d / total)
    G = np.vstack(rows)
    for i in range(len(rows)):
        for j in range(i + 1, len(rows)):
            if angular_separation(G[i], G[j]) <= MIN_SEPARATION_DEG:
                raise DegenerateSpec(f"end members {i} and {j} are closer than {MIN_SEPARATION_DEG} degree")
    return G


def sample_abundances(spec: MixingSpec, K: int):
    """Rows ``f + (1 - f K) d`` with ``d`` flat on the simplex."""
    f = float(spec.min_abundance)
    if K < 1:
        raise ValidationError("K must be >= 1")
    if f * K >= 1.0:
        raise InfeasibleFloor(f"floor {f} times K={K} is not below 1")
    rng = np.random.default_rng(spec.seed)
    D = rng.dirichlet(np.ones(K), size=spec.n_specimens)
    D /= D.sum(axis=1, keepdims=True)
    return f + (1.0 - f * K) * D


def mix(G_true, W_true, noise_sd=0.0, seed: Optional[int] = 0):
    """``P = W G``; with noise, add Gaussian noise, clamp at 0 and renormalize rows."""
    G = as_matrix(G_true, "G_true")
    W = as_matrix(W_true, "W_true")
    if W.shape[1] != G.shape[0]:
        raise ValidationError(f"W is {W.shape}, G is {G.shape}")
    P = W @ G
    if noise_sd > 0:
        rng = np.random.default_rng(seed)
        P = np.maximum(P + noise_sd * rng.standard_normal(P.shape), 0.0)
        sums = P.sum(axis=1, keepdims=True)
        if np.any(sums <= 0):
            raise ValidationError("noise wiped out a specimen; lower noise_sd")
        P = P / sums
    return P


def make_dataset(em_specs, mixing: MixingSpec):
    """Generate ``(P, W_true, G_true)`` for one mixing specification."""
    G = make_end_members(em_specs)
    W = sample_abundances(mixing, G.shape[0])
    P = mix(G, W, mixing.noise_sd, mixing.seed)
    return P, W, G
