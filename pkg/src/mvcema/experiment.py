"""Benchmark runner: error and volume tables against the degree of mixing.

Each cell (mixing level, volume weight, replicate) generates a dataset,
unmixes it and scores the result. Tables have one row per mixing level and
one column per volume weight (plus a standard-deviation column when there is
more than one replicate). Nothing time-dependent is written, so identical
specs give byte-identical files.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .apfgm import OuterSettings, run_apfgm
from .errors import MvcEmaError, ValidationError
from .io import _csv_text, atomic_write_text, fmt
from .metrics import align, maab, maem, volume
from .synth import MixingSpec, default_em_specs, make_end_members, mix, sample_abundances

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExperimentSpec:
    levels: tuple = (0.0, 0.05, 0.10, 0.15, 0.20, 0.25)
    lambda_primes: tuple = (-1.0, 0.0, 1.0)
    replicates: int = 3
    n_specimens: int = 200
    data_seed: int = 100        # replicate r uses data seed data_seed + r at every level
    run_seed: int = 0           # and solver seed run_seed + r
    noise_sd: float = 0.0
    profile_level: float = 0.15
    outer: OuterSettings = field(default_factory=OuterSettings)
    workers: int = 1

    def __post_init__(self):
        K = len(default_em_specs())
        if not self.levels or not self.lambda_primes:
            raise ValidationError("need at least one level and one lambda_prime")
        for f in self.levels:
            if f < 0 or f * K >= 1:
                raise ValidationError(f"mixing level {f} is infeasible for K={K}")
        if self.replicates < 1 or self.n_specimens < K or self.workers < 1:
            raise ValidationError("replicates, n_specimens and workers must be positive")
        object.__setattr__(self, "levels", tuple(float(f) for f in self.levels))
        object.__setattr__(self, "lambda_primes", tuple(float(v) for v in self.lambda_primes))


def method_name(lambda_prime):
    if lambda_prime == 1:
        return "max_volume"
    if lambda_prime == -1:
        return "min_volume"
    if lambda_prime == 0:
        return "no_volume"
    return f"lp_{lambda_prime:g}"


@dataclass
class CellResult:
    level: float
    lambda_prime: float
    replicate: int
    maem: float = float("nan")
    maab: float = float("nan")
    det: float = float("nan")
    residual: float = float("nan")
    iterations: int = 0
    termination: str = ""
    lambda_final: float = float("nan")
    note: str = ""
    G_aligned: Optional[np.ndarray] = None
    W_aligned: Optional[np.ndarray] = None


def make_cell_data(spec, level, replicate):
    G_true = make_end_members(default_em_specs())
    mixing = MixingSpec(spec.n_specimens, level, spec.data_seed + replicate, spec.noise_sd)
    W_true = sample_abundances(mixing, G_true.shape[0])
    return mix(G_true, W_true, mixing.noise_sd, mixing.seed), W_true, G_true


def run_cell(spec, level, lambda_prime, replicate, callback=None):
    cell = CellResult(level, lambda_prime, replicate)
    try:
        P, W_true, G_true = make_cell_data(spec, level, replicate)
        F, report = run_apfgm(P, G_true.shape[0], lambda_prime, spec.run_seed + replicate, spec.outer,
                              callback=callback)
        pair = align(G_true, F.G, F.W)
    except MvcEmaError as err:
        cell.note = f"{type(err).__name__}: {err}"
        log.warning("cell level=%g lambda'=%g rep=%d failed: %s", level, lambda_prime, replicate, err)
        return cell
    cell.maem = maem(G_true, pair.aligned_G)
    cell.maab = maab(W_true, pair.aligned_W)
    cell.det = volume(F.G)
    cell.residual = report.residual[-1] if report.residual else report.initial_residual
    cell.iterations = report.iterations
    cell.termination = report.termination
    cell.lambda_final = report.lam_in_force
    cell.G_aligned = pair.aligned_G
    cell.W_aligned = pair.aligned_W
    return cell


def _mean_sd(values):
    v = np.asarray([x for x in values if np.isfinite(x)], dtype=float)
    if v.size == 0:
        return float("nan"), float("nan")
    sd = float(np.std(v, ddof=1)) if v.size > 1 else float("nan")
    return float(np.mean(v)), sd


def summary_table(spec, cells, metric):
    """Rows = mixing levels; columns = methods (mean, and sd when replicated)."""
    header = ["level"]
    for lp in spec.lambda_primes:
        header.append(method_name(lp))
        if spec.replicates > 1:
            header.append(method_name(lp) + "_sd")
    rows = []
    for f in spec.levels:
        row = [fmt(f)]
        for lp in spec.lambda_primes:
            mean, sd = _mean_sd([getattr(c, metric) for c in cells if c.level == f and c.lambda_prime == lp])
            row.append(fmt(mean))
            if spec.replicates > 1:
                row.append(fmt(sd))
        rows.append(row)
    return header, rows


def runs_table(cells):
    header = ["level", "lambda_prime", "replicate", "maem", "maab", "det", "residual",
              "iterations", "termination", "lambda_final", "note"]
    rows = [[fmt(c.level), fmt(c.lambda_prime), c.replicate, fmt(c.maem), fmt(c.maab), fmt(c.det),
             fmt(c.residual), c.iterations, c.termination, fmt(c.lambda_final), c.note] for c in cells]
    return header, rows


def profile_table(spec, cells):
    """End-member profiles at ``profile_level`` (first replicate): truth and each method."""
    grid = default_em_specs()[0].grid
    G_true = make_end_members(default_em_specs())
    K = G_true.shape[0]
    header = ["grain_size"] + [f"true_em{k + 1}" for k in range(K)]
    cols = [G_true[k] for k in range(K)]
    for lp in spec.lambda_primes:
        match = [c for c in cells if c.level == spec.profile_level and c.lambda_prime == lp and c.replicate == 0]
        G = match[0].G_aligned if match and match[0].G_aligned is not None else np.full_like(G_true, np.nan)
        header += [f"{method_name(lp)}_em{k + 1}" for k in range(K)]
        cols += [G[k] for k in range(K)]
    rows = [[fmt(x)] + [fmt(c[j]) for c in cols] for j, x in enumerate(grid)]
    return header, rows


def abundance_table(spec, cells):
    """True vs estimated abundances at ``profile_level`` (first replicate), long format."""
    _, W_true, _ = make_cell_data(spec, spec.profile_level, 0)
    K = W_true.shape[1]
    header = ["method", "specimen"] + [f"true_em{k + 1}" for k in range(K)] + [f"est_em{k + 1}" for k in range(K)]
    rows = []
    for lp in spec.lambda_primes:
        match = [c for c in cells if c.level == spec.profile_level and c.lambda_prime == lp and c.replicate == 0]
        W = match[0].W_aligned if match and match[0].W_aligned is not None else np.full_like(W_true, np.nan)
        for i in range(W_true.shape[0]):
            rows.append([method_name(lp), i + 1] + [fmt(x) for x in W_true[i]] + [fmt(x) for x in W[i]])
    return header, rows


def spec_text(spec):
    d = asdict(spec)
    outer = d.pop("outer")
    inner = outer.pop("inner")
    lines = [f"{k} = {v}" for k, v in d.items()]
    lines += [f"outer.{k} = {v}" for k, v in outer.items()]
    lines += [f"inner.{k} = {v}" for k, v in inner.items()]
    return "\n".join(lines) + "\n"


def run_experiment(spec: ExperimentSpec, out_dir=None, progress=None, callback=None):
    """Run every cell and return ``{filename: (header, rows)}``; write them if ``out_dir``.

    ``progress(cell)`` is called after each cell; ``callback`` is handed to the
    solver of every cell.
    """
    jobs = [(f, lp, r) for f in spec.levels for lp in spec.lambda_primes for r in range(spec.replicates)]
    profile_in_grid = spec.profile_level in spec.levels

    def job(args):
        cell = run_cell(spec, *args, callback=callback)
        if progress is not None:
            progress(cell)
        return cell

    if spec.workers > 1:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            cells = list(pool.map(job, jobs))
    else:
        cells = [job(j) for j in jobs]

    tables = {
        "maem.csv": summary_table(spec, cells, "maem"),
        "maab.csv": summary_table(spec, cells, "maab"),
        "volume.csv": summary_table(spec, cells, "det"),
        "runs.csv": runs_table(cells),
    }
    if profile_in_grid:
        tables["em_profiles.csv"] = profile_table(spec, cells)
        tables["abundances.csv"] = abundance_table(spec, cells)

    if out_dir is not None:
        out = Path(out_dir)
        for name, (header, rows) in tables.items():
            atomic_write_text(out / name, _csv_text(header, rows))
        atomic_write_text(out / "experiment.txt", spec_text(spec))
    return tables
