"""Command-line interface: periodogram, fit, cluster, simulate, compare, serve.

Exit codes: 0 success, 2 usage/parse/validation errors, 3 fit ran but did not
converge (outputs are still written and flagged), 4 service port unavailable.
Every output directory carries a machine-readable meta.json; plots are emitted
as data (JSON/CSV), never as images.
"""

from __future__ import annotations

import argparse
import json
import os
import socket
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import (
    estimate_ncsde,
    estimate_nsde,
    estimate_ps,
    estimate_sps,
    estimate_tsvd_nsde,
    estimate_tsvd_ps,
    nsde_coefficient_matrix,
)
from .basis import BasisSpec, eval_basis, penalty_for
from .cluster import cut, elbow, euclidean_distances, ward_linkage, wss_curve
from .engine import FitConfig, fit
from .simulate import DEFAULT_CELLS, run_study
from .spectral import (
    CsvFormatError,
    periodogram,
    read_time_series_csv,
    truncate_band,
    write_matrix_csv,
)

__all__ = ["main"]


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "handler"):
        parser.print_help()
        return 2
    try:
        return args.handler(args)
    except CsvFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ncsde",
        description="Collective spectral density estimation and clustering",
    )
    parser.add_argument("--version", action="version", version=f"ncsde {__version__}")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("periodogram", help="compute periodograms from a CSV of series")
    p.add_argument("input", help="CSV, one column per series, header row of labels")
    p.add_argument("--truncate", type=int, default=None, help="keep this many lowest frequencies")
    p.add_argument("-o", "--output", required=True, help="output CSV path")
    p.set_defaults(handler=cmd_periodogram)

    p = sub.add_parser("fit", help="collective penalized Whittle fit")
    p.add_argument("input", help="CSV of series")
    p.add_argument("--config", default=None, help="JSON config file; explicit flags win")
    p.add_argument("--K", type=int, default=None, help="number of adaptive basis functions")
    p.add_argument("--L", type=int, default=None, help="rich basis size (default 40)")
    p.add_argument("--penalty", default=None, help="d2 | diff:a (default diff:2)")
    p.add_argument("--lambda", dest="lambda_spec", default=None,
                   help="fixed:x | auto | grid:x,y,... (default auto)")
    p.add_argument("--truncate", type=int, default=None)
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("cluster", help="Ward clustering of scores or SDF columns")
    p.add_argument("input", help="CSV of points (scores: rows; SDFs: use --points columns)")
    p.add_argument("--points", choices=("rows", "columns"), default="rows",
                   help="whether each point is a row or a column of the CSV")
    p.add_argument("--k", default="auto", help="cluster count or 'auto' for the elbow")
    p.add_argument("--kmax", type=int, default=10, help="WSS curve length for auto mode")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(handler=cmd_cluster)

    p = sub.add_parser("simulate", help="Monte Carlo study over (n, m) cells")
    p.add_argument("--cells", default=None,
                   help="comma-separated NxM pairs, e.g. 400x30,100x6 (default: the nine study cells)")
    p.add_argument("--runs", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--K", type=int, default=3)
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes (default: NCSDE_THREADS or 1)")
    p.add_argument("-o", "--output", required=True, help="report CSV path")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("compare", help="run all six estimators on a CSV of series")
    p.add_argument("input")
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--L", type=int, default=40)
    p.add_argument("--truncate", type=int, default=None)
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("serve", help="start the HTTP analysis service")
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--data-dir", default="./ncsde-data")
    p.add_argument("--threads", type=int, default=None, help="fit workers")
    p.set_defaults(handler=cmd_serve)

    return parser


def _write_meta(directory: Path, command: str, payload: dict):
    meta = {"tool": "ncsde", "version": __version__, "command": command}
    meta.update(payload)
    (directory / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return max(1, args.threads)
    env = os.environ.get("NCSDE_THREADS")
    return max(1, int(env)) if env else 1


def cmd_periodogram(args) -> int:
    ts = read_time_series_csv(args.input)
    pg = periodogram(ts)
    if args.truncate is not None:
        pg = truncate_band(pg, args.truncate)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    labels = ts.labels if ts.labels else [f"s{i}" for i in range(ts.m)]
    write_matrix_csv(out, pg.ordinates, header=labels)
    grid_path = out.with_suffix(".grid.csv")
    write_matrix_csv(grid_path, pg.grid.omegas[:, None], header=["omega"])
    _write_meta(
        out.parent,
        "periodogram",
        {
            "input": str(args.input),
            "n": ts.n,
            "m": ts.m,
            "n_freq": pg.n_freq,
            "truncate": args.truncate,
            "outputs": [out.name, grid_path.name],
        },
    )
    return 0


def _parse_penalty(text):
    if text in (None, "diff:2"):
        return "difference", 2
    if text == "d2":
        return "second_derivative", 2
    if text.startswith("diff:"):
        return "difference", int(text.split(":", 1)[1])
    raise ValueError(f"cannot parse penalty '{text}' (expected d2 or diff:a)")


def _parse_lambda(text):
    if text in (None, "auto"):
        return {"lambda_mode": "auto", "lambda_value": 1.0}
    if text.startswith("fixed:"):
        return {"lambda_mode": "fixed", "lambda_value": float(text.split(":", 1)[1])}
    if text.startswith("grid:"):
        grid = tuple(float(v) for v in text.split(":", 1)[1].split(","))
        return {"lambda_mode": "aic_grid", "lambda_grid": grid}
    raise ValueError(f"cannot parse lambda '{text}' (expected fixed:x, auto, or grid:...)")


def cmd_fit(args) -> int:
    file_config = {}
    if args.config:
        file_config = json.loads(Path(args.config).read_text())

    K = args.K if args.K is not None else file_config.get("K")
    if K is None:
        raise ValueError("--K is required (flag or config file)")
    L = args.L if args.L is not None else file_config.get("L", 40)
    penalty_kind, penalty_order = _parse_penalty(
        args.penalty if args.penalty is not None else file_config.get("penalty")
    )
    lam = _parse_lambda(
        args.lambda_spec if args.lambda_spec is not None else file_config.get("lambda")
    )
    truncate = args.truncate if args.truncate is not None else file_config.get("truncate")

    ts = read_time_series_csv(args.input)
    pg = periodogram(ts)
    if truncate is not None:
        pg = truncate_band(pg, int(truncate))
    spec = BasisSpec(n_basis=int(L), domain=(0.0, float(pg.grid.omegas[-1])))
    basis = eval_basis(pg.grid, spec)
    penalty = penalty_for(spec, penalty_kind, penalty_order)
    config = FitConfig(
        n_components=int(K),
        penalty_kind=penalty_kind,
        penalty_order=penalty_order,
        **lam,
    )
    result = fit(pg, basis, penalty, config)

    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    coeff = result.coefficients
    write_matrix_csv(out / "theta.csv", coeff.theta)
    write_matrix_csv(out / "a.csv", coeff.scores)
    labels = ts.labels if ts.labels else [f"s{i}" for i in range(ts.m)]
    sdf_values = np.exp(basis.values @ coeff.theta @ coeff.scores.T)
    write_matrix_csv(out / "sdf.csv", sdf_values, header=labels)
    (out / "trace.json").write_text(
        json.dumps(
            {
                "objective": list(result.objective_trace),
                "lambda": list(result.lambda_trace),
            },
            indent=2,
        )
    )
    _write_meta(
        out,
        "fit",
        {
            "input": str(args.input),
            "n": ts.n,
            "m": ts.m,
            "config": config.to_json(),
            "basis": {"L": spec.n_basis, "degree": spec.degree, "domain": list(spec.domain)},
            "converged": result.converged,
            "iterations": result.iterations,
            "lambda": result.lambda_final,
            "df": result.df,
            "aic": result.aic,
            "deviance": result.deviance,
            "flags": list(result.flags),
            "outputs": ["theta.csv", "a.csv", "sdf.csv", "trace.json"],
        },
    )
    return 0 if result.converged else 3


def cmd_cluster(args) -> int:
    ts_like = _read_matrix(args.input)
    points = ts_like if args.points == "rows" else ts_like.T
    m = points.shape[0]
    if args.k != "auto":
        k = int(args.k)
        if not 1 <= k <= m:
            raise ValueError(f"k must be in [1, {m}], got {k}")
    kmax = min(args.kmax, m)
    curve = wss_curve(points, kmax)
    suggested = elbow(curve) if kmax >= 3 else 1
    k = suggested if args.k == "auto" else int(args.k)

    dend = ward_linkage(euclidean_distances(points))
    labels = cut(dend, k).labels
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(out / "labels.csv", np.column_stack([np.arange(m), labels]),
                     header=["series", "label"])
    (out / "dendrogram.json").write_text(json.dumps(dend.to_json(), indent=2))
    write_matrix_csv(out / "wss.csv", np.column_stack([np.arange(1, kmax + 1), curve]),
                     header=["k", "wss"])
    _write_meta(
        out,
        "cluster",
        {
            "input": str(args.input),
            "m": m,
            "k": k,
            "suggested_k": suggested,
            "outputs": ["labels.csv", "dendrogram.json", "wss.csv"],
        },
    )
    return 0


def _read_matrix(path) -> np.ndarray:
    ts = read_time_series_csv(path)
    return np.asarray(ts.values)


def _parse_cells(text):
    if text is None:
        return DEFAULT_CELLS
    cells = []
    for token in text.split(","):
        n, _, m = token.strip().partition("x")
        cells.append((int(n), int(m)))
    return cells


def cmd_simulate(args) -> int:
    cells = _parse_cells(args.cells)
    report = run_study(
        cells=cells,
        n_runs=args.runs,
        n_components=args.K,
        seed=args.seed,
        n_jobs=_threads(args),
    )
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_csv())
    out.with_suffix(".json").write_text(json.dumps(report.to_json(), indent=2))
    _write_meta(
        out.parent,
        "simulate",
        {
            "cells": [list(c) for c in cells],
            "runs": args.runs,
            "seed": args.seed,
            "outputs": [out.name, out.with_suffix(".json").name],
        },
    )
    return 0


def cmd_compare(args) -> int:
    ts = read_time_series_csv(args.input)
    pg = periodogram(ts)
    if args.truncate is not None:
        pg = truncate_band(pg, args.truncate)
    spec = BasisSpec(n_basis=args.L, domain=(0.0, float(pg.grid.omegas[-1])))
    basis = eval_basis(pg.grid, spec)
    penalty = penalty_for(spec, "difference", 2)
    config = FitConfig(n_components=args.K)
    psi = nsde_coefficient_matrix(pg, basis)
    estimates = [
        estimate_ps(pg),
        estimate_sps(pg, basis),
        estimate_tsvd_ps(pg, basis, args.K),
        estimate_nsde(pg, basis, psi=psi),
        estimate_tsvd_nsde(pg, basis, args.K, psi=psi),
        estimate_ncsde(pg, basis, penalty, config),
    ]
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    labels = ts.labels if ts.labels else [f"s{i}" for i in range(ts.m)]
    files = []
    for est in estimates:
        stem = est.kind.value.replace(".", "_")
        write_matrix_csv(out / f"sdf_{stem}.csv", est.values, header=labels)
        files.append(f"sdf_{stem}.csv")
    _write_meta(
        out,
        "compare",
        {
            "input": str(args.input),
            "K": args.K,
            "estimators": [e.metadata() for e in estimates],
            "outputs": files,
        },
    )
    return 0


def cmd_serve(args) -> int:
    try:
        probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((args.host, args.port))
        probe.close()
    except OSError as exc:
        print(f"error: cannot bind {args.host}:{args.port}: {exc}", file=sys.stderr)
        return 4
    import uvicorn

    from .service import create_app

    app = create_app(data_dir=args.data_dir, workers=_threads(args))
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


if __name__ == "__main__":
    sys.exit(main())
