"""Command-line entry point: ``mvcema {unmix,synth,experiment,metrics,check-ssc}``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 I/O failure.
"""
import argparse
import logging
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .apfgm import OuterSettings, run_apfgm
from .errors import MvcEmaError, ValidationError
from .experiment import ExperimentSpec, run_experiment
from .io import fmt, read_gsd_csv, read_matrix_csv, write_gsd_csv, write_matrix_csv, write_result
from .metrics import align, check_ssc1, check_ssc2, maab, maem, volume
from .synth import (MixingSpec, default_em_specs, make_end_members, mix, sample_abundances,
                    two_source_em_specs)


@dataclass(frozen=True)
class RunConfig:
    K: int
    lambda_prime: float
    seed: int
    out_dir: Path
    outer: OuterSettings
    input_path: Optional[Path] = None
    synth: Optional[MixingSpec] = None

    def __post_init__(self):
        if (self.input_path is None) == (self.synth is None):
            raise ValidationError("give exactly one of an input file or a synthetic spec")
        if self.K < 2:
            raise ValidationError("K must be >= 2")


def _outer(args):
    return OuterSettings(maxiter=args.maxiter, rel_tol=args.tol, threads=args.threads,
                         init=args.init, curvature_cap=args.cap)


def synth_data(mixing, two_source=False):
    specs = two_source_em_specs() if two_source else default_em_specs()
    G = make_end_members(specs)
    W = sample_abundances(mixing, G.shape[0])
    return mix(G, W, mixing.noise_sd, mixing.seed), W, G, specs[0].grid


def cmd_unmix(args):
    synth = None
    if args.input is None:
        synth = MixingSpec(args.n, args.level, args.data_seed, args.noise)
    cfg = RunConfig(args.k, args.lambda_prime, args.seed, Path(args.out), _outer(args),
                    Path(args.input) if args.input else None, synth)
    if cfg.input_path is not None:
        P = read_gsd_csv(cfg.input_path)
    else:
        P = synth_data(cfg.synth, args.two_source)[0]
    F, report = run_apfgm(P, cfg.K, cfg.lambda_prime, cfg.seed, cfg.outer)
    echo = {"input": str(cfg.input_path) if cfg.input_path else f"synthetic {cfg.synth}",
            "seed": cfg.seed, "maxiter": cfg.outer.maxiter, "tol": cfg.outer.rel_tol,
            "threads": cfg.outer.threads, "init": cfg.outer.init, "curvature_cap": cfg.outer.curvature_cap}
    write_result(F, report, cfg.out_dir, echo)
    print(f"{report.termination} after {report.iterations} iterations; "
          f"residual {fmt(report.residual[-1] if report.residual else report.initial_residual)}, "
          f"det {fmt(volume(F.G))}; results in {cfg.out_dir}")
    return 0


def cmd_synth(args):
    mixing = MixingSpec(args.n, args.level, args.seed, args.noise)
    P, W, G, grid = synth_data(mixing, args.two_source)
    out = Path(args.out)
    params = {"generator": "two_source" if args.two_source else "default", "n_specimens": args.n,
              "min_abundance": args.level, "seed": args.seed, "noise_sd": args.noise}
    write_gsd_csv(out, P, grid, params)
    stem = out.with_suffix("")
    write_matrix_csv(f"{stem}_W_true.csv", W, [f"em{k + 1}" for k in range(W.shape[1])])
    write_matrix_csv(f"{stem}_G_true.csv", G, [fmt(g) for g in grid])
    print(f"wrote {out} ({P.shape[0]} x {P.shape[1]}) and true factors")
    return 0


def cmd_experiment(args):
    outer = replace(OuterSettings(), maxiter=args.maxiter, threads=args.threads)
    kw = {}
    if args.levels:
        kw["levels"] = tuple(args.levels)
    if args.lambda_primes:
        kw["lambda_primes"] = tuple(args.lambda_primes)
    spec = ExperimentSpec(replicates=args.replicates, n_specimens=args.n, data_seed=args.data_seed,
                          run_seed=args.seed, outer=outer, workers=args.workers, **kw)

    def progress(c):
        if args.verbose:
            print(f"level {c.level:g} lambda' {c.lambda_prime:g} rep {c.replicate}: "
                  f"maem {c.maem:.3f} maab {c.maab:.3f} det {c.det:.4g} {c.note}", file=sys.stderr)

    tables = run_experiment(spec, args.out, progress)
    header, rows = tables["maem.csv"]
    print("MAEM (degrees)")
    print(",".join(header))
    for r in rows:
        print(",".join(str(x) for x in r))
    print(f"tables written to {args.out}")
    return 0


def cmd_metrics(args):
    G_true = read_matrix_csv(args.true_g)
    G_est = read_matrix_csv(args.est_g)
    W_est = read_matrix_csv(args.est_w) if args.est_w else None
    # without abundances, align a K x K placeholder so only the G permutation matters
    pair = align(G_true, G_est, W_est if W_est is not None else np.eye(G_est.shape[0]))
    print(f"permutation = {' '.join(str(p + 1) for p in pair.permutation)}")
    print(f"maem = {fmt(maem(G_true, pair.aligned_G))}")
    if args.true_w and W_est is not None:
        print(f"maab = {fmt(maab(read_matrix_csv(args.true_w), pair.aligned_W))}")
    print(f"det_true = {fmt(volume(G_true))}")
    print(f"det_est = {fmt(volume(G_est))}")
    return 0


def cmd_check_ssc(args):
    G = read_matrix_csv(args.g)
    rep = check_ssc1(G, args.samples, args.seed)
    print(f"ssc1: verdict = {rep.verdict}, samples = {rep.n_samples}, violations = {rep.violations}, "
          f"max_residual = {rep.max_violation:.3g}")
    print(f"ssc2: verdict = {check_ssc2(G).verdict}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="mvcema", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def solver_flags(sp):
        sp.add_argument("--maxiter", type=int, default=500)
        sp.add_argument("--threads", type=int, default=1, help="workers for the abundance update")

    u = sub.add_parser("unmix", help="factor a dataset")
    u.add_argument("--input", help="specimens-by-bins CSV; omit to unmix a synthetic dataset")
    u.add_argument("--k", type=int, required=True)
    u.add_argument("--lambda-prime", type=float, default=1.0)
    u.add_argument("--seed", type=int, default=0)
    u.add_argument("--tol", type=float, default=1e-9)
    u.add_argument("--init", choices=["spa", "flat"], default="spa")
    u.add_argument("--cap", type=float, default=0.01, help="volume curvature cap")
    u.add_argument("--out", required=True)
    u.add_argument("--level", type=float, default=0.0, help="synthetic: abundance floor")
    u.add_argument("--n", type=int, default=200, help="synthetic: specimens")
    u.add_argument("--data-seed", type=int, default=100, help="synthetic: data seed")
    u.add_argument("--noise", type=float, default=0.0, help="synthetic: noise sd")
    u.add_argument("--two-source", action="store_true", help="synthetic: two overlapping sources")
    solver_flags(u)
    u.set_defaults(func=cmd_unmix)

    s = sub.add_parser("synth", help="generate a synthetic dataset")
    s.add_argument("--out", required=True, help="dataset CSV path")
    s.add_argument("--level", type=float, default=0.0)
    s.add_argument("--n", type=int, default=200)
    s.add_argument("--seed", type=int, default=100)
    s.add_argument("--noise", type=float, default=0.0)
    s.add_argument("--two-source", action="store_true")
    s.set_defaults(func=cmd_synth)

    e = sub.add_parser("experiment", help="error and volume tables against mixing level")
    e.add_argument("--out", required=True)
    e.add_argument("--levels", type=float, nargs="+")
    e.add_argument("--lambda-primes", type=float, nargs="+")
    e.add_argument("--replicates", type=int, default=3)
    e.add_argument("--n", type=int, default=200)
    e.add_argument("--seed", type=int, default=0, help="solver seed of replicate 0")
    e.add_argument("--data-seed", type=int, default=100, help="data seed of replicate 0")
    e.add_argument("--workers", type=int, default=1)
    solver_flags(e)
    e.set_defaults(func=cmd_experiment)

    m = sub.add_parser("metrics", help="compare estimated factors with the truth")
    m.add_argument("--true-g", required=True)
    m.add_argument("--est-g", required=True)
    m.add_argument("--est-w")
    m.add_argument("--true-w")
    m.set_defaults(func=cmd_metrics)

    c = sub.add_parser("check-ssc", help="sampling check of the cone condition")
    c.add_argument("--g", required=True, help="end-member CSV")
    c.add_argument("--samples", type=int, default=1000)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_check_ssc)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except MvcEmaError as err:
        print(f"error: {err}", file=sys.stderr)
        return err.exit_code


if __name__ == "__main__":
    sys.exit(main())
