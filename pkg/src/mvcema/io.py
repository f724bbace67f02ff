"""CSV readers and writers for datasets, factorizations and run traces.

Numbers are written with 17 significant digits so float64 values round-trip
exactly. Every file is written to a temporary sibling and moved into place.
"""
import csv
import io as _io
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .apfgm import INGEST_TOL, Factorization, GsdMatrix, RunReport
from .errors import IoError, Malformed, NegativeEntry, RowSumOutOfTolerance

FLOAT_FMT = "%.17g"


def fmt(x):
    return FLOAT_FMT % x


def atomic_write_text(path, text):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as err:
        raise IoError(f"cannot write {path}: {err}") from err


def _csv_text(header, rows):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_matrix_csv(path, A, header=None, comments=None):
    A = np.asarray(A, dtype=float)
    header = header if header is not None else [f"c{j + 1}" for j in range(A.shape[1])]
    text = _csv_text(header, (list(map(float, r)) for r in A))
    if comments:
        text = "".join(f"# {k} = {v}\n" for k, v in comments.items()) + text
    atomic_write_text(path, text)


def _read_lines(path):
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            return fh.read().splitlines()
    except OSError as err:
        raise IoError(f"cannot read {path}: {err}") from err


def read_table(path):
    """Parse a headed numeric CSV; returns ``(header, data, line_numbers)``.

    Blank lines and lines starting with ``#`` are skipped. Errors report the
    1-based line number in the file.
    """
    header, rows, lines = None, [], []
    for lineno, raw in enumerate(_read_lines(path), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        fields = next(csv.reader([raw]))
        if header is None:
            header = [f.strip() for f in fields]
            continue
        if len(fields) != len(header):
            raise Malformed(lineno, f"expected {len(header)} fields, got {len(fields)}")
        try:
            vals = [float(f) for f in fields]
        except ValueError:
            raise Malformed(lineno, "non-numeric field") from None
        if not all(math.isfinite(v) for v in vals):
            raise Malformed(lineno, "non-finite field")
        rows.append(vals)
        lines.append(lineno)
    if header is None:
        raise Malformed(1, "missing header row")
    if not rows:
        raise Malformed(len(_read_lines(path)) + 1, "no data rows")
    return header, np.array(rows, dtype=float), lines


def read_matrix_csv(path):
    return read_table(path)[1]


def read_header_params(path):
    """``key = value`` pairs from the leading ``#`` block of a dataset file."""
    params = {}
    for raw in _read_lines(path):
        if not raw.startswith("#"):
            break
        key, sep, value = raw[1:].partition("=")
        if sep:
            params[key.strip()] = value.strip()
    return params


def read_gsd_csv(path):
    """Read a specimens-by-bins CSV into a validated ``GsdMatrix``."""
    _, P, lines = read_table(path)
    for r, c in np.argwhere(P < 0)[:1]:
        raise NegativeEntry(lines[r], int(c) + 1)
    sums = P.sum(axis=1)
    for r in np.flatnonzero(np.abs(sums - 1.0) > INGEST_TOL)[:1]:
        raise RowSumOutOfTolerance(lines[r], float(sums[r]))
    return GsdMatrix(P)


def write_gsd_csv(path, P, grid=None, params=None):
    """Write a dataset; ``grid`` labels the bins, ``params`` becomes the ``#`` header."""
    P = np.asarray(P, dtype=float)
    header = [fmt(g) for g in grid] if grid is not None else [f"bin{j + 1}" for j in range(P.shape[1])]
    write_matrix_csv(path, P, header, params)


def trace_rows(report: RunReport):
    for t in range(report.iterations):
        yield [t + 1, float(report.objective[t]), float(report.residual[t]),
               float(report.det[t]), float(report.lam[t])]


def write_result(F: Factorization, report: RunReport, out_dir, config=None):
    """Write ``W.csv``, ``G.csv``, ``trace.csv`` and ``meta.txt`` into ``out_dir``."""
    out = Path(out_dir)
    K = F.K
    write_matrix_csv(out / "W.csv", F.W, [f"em{k + 1}" for k in range(K)])
    write_matrix_csv(out / "G.csv", F.G, [f"bin{j + 1}" for j in range(F.G.shape[1])])
    atomic_write_text(out / "trace.csv",
                      _csv_text(["iteration", "objective", "residual", "det", "lambda"], trace_rows(report)))
    vc = report.volume
    meta = dict(config or {})
    meta.update({
        "software_version": __version__,
        "K": K,
        "mode": vc.mode,
        "lambda_prime": fmt(vc.lambda_prime),
        "lambda_nominal": fmt(vc.lam),
        "lambda_final": fmt(report.lam_in_force),
        "initial_residual": fmt(report.initial_residual),
        "initial_det": fmt(report.initial_det),
        "iterations": report.iterations,
        "termination": report.termination,
        "final_residual": fmt(report.residual[-1]) if report.residual else "",
        "final_det": fmt(report.det[-1]) if report.det else "",
        "wall_time_s": f"{report.wall_time:.3f}",
        "warnings": len(report.warnings),
    })
    atomic_write_text(out / "meta.txt", "".join(f"{k} = {v}\n" for k, v in meta.items()))
    return [out / n for n in ("W.csv", "G.csv", "trace.csv", "meta.txt")]


def read_meta(path):
    meta = {}
    for raw in _read_lines(path):
        key, sep, value = raw.partition("=")
        if sep:
            meta[key.strip()] = value.strip()
    return meta
