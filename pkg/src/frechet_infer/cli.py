"""Command-line interface.

::

    frechet-infer test global  --space laplacian --m 13 --x X.csv --y Y.csv --seed 7
    frechet-infer test partial --space simplex --base 1,3 --x X.csv --y Y.csv
    frechet-infer simulate --preset paper-network-global --n 300 --B 500 --seed 1
    frechet-infer fit     --space sphere --x X.csv --y Y.csv --out fitted.csv
    frechet-infer predict --space sphere --x X.csv --y Y.csv --query Q.csv --out pred.csv
    frechet-infer replay run.manifest.json

Exit codes: 0 success (whether or not a test rejects), 2 input error,
3 solver failure. Every command writes a run manifest that ``replay`` can
re-execute to reproduce the outputs byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import platform
import secrets
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import BACKEND
from .errors import DegenerateGeometryError, FrechetError, SolverError
from .inference import MultiplierConfig, r_squared_global, test_global, test_partial
from .regression import Dataset, fit, objective_matrix
from .simulation import PRESETS, config_dict, preset_cells, run_power_study
from .spaces import make_space

logger = logging.getLogger("frechet_infer")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SOLVER = 3

LOG_LEVELS = {"error": logging.ERROR, "warning": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}


class InputError(Exception):
    """Bad command-line input or data file."""


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# -- CSV ingestion ----------------------------------------------------------------

def read_numeric_csv(path) -> tuple[list[str], np.ndarray]:
    """Header and float matrix of a comma-separated file with a header row."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if not rows:
        raise InputError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    if not body:
        raise InputError(f"{path}: no data rows")
    out = np.empty((len(body), len(header)))
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise InputError(f"{path}: line {i} has {len(row)} fields, header has {len(header)}")
        for j, cell in enumerate(row):
            try:
                out[i - 2, j] = float(cell)
            except ValueError:
                raise InputError(f"{path}: line {i}, column {header[j]!r}: non-numeric value {cell!r}")
    return header, out


def write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])
    _write_text(path, buf.getvalue())


def _write_text(path, text) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=True) + "\n"


def build_space(args, Yraw: np.ndarray):
    """Resolve the response space from flags, filling unset sizes from the data."""
    width = Yraw.shape[1]
    kind = args.space
    if kind in ("euclidean", "sphere", "simplex"):
        return make_space(kind, dim=width)
    if kind == "laplacian":
        if args.m is None:
            raise InputError("--m is required for --space laplacian")
        q = args.m * (args.m - 1) // 2
        if width != q:
            raise InputError(f"q != m(m-1)/2: {width} columns but m={args.m} needs {q}")
        bound = args.edge_bound
        if bound is None:
            bound = max(float(-Yraw.min(initial=0.0)), 1.0)
        return make_space("laplacian", m=args.m, edge_bound=bound)
    if kind == "wasserstein":
        M = args.M if args.M is not None else width
        if M != width:
            raise InputError(f"--M {M} does not match {width} quantile columns")
        lo = args.lo if args.lo is not None else float(Yraw.min())
        hi = args.hi if args.hi is not None else float(Yraw.max())
        if not lo < hi:
            hi = lo + 1.0
        return make_space("wasserstein", M=M, lo=lo, hi=hi)
    raise InputError(f"unknown space {kind!r}")


def decode_responses(space, Yraw: np.ndarray) -> np.ndarray:
    """Decode CSV rows into points and validate each one."""
    if space.kind.value == "simplex":
        sums = Yraw.sum(axis=1)
        close = np.abs(sums - 1.0) <= 1e-6
        Yraw = np.where(close[:, None], Yraw / sums[:, None], Yraw)
    try:
        Y = space.from_rows(Yraw)
    except FrechetError as exc:
        raise InputError(str(exc)) from exc
    for i in range(Y.shape[0]):
        msg = space.validate(Y[i])
        if msg is not None:
            raise InputError(f"response row {i + 1}: {msg}")
    if space.kind.value == "simplex":
        Y = np.clip(Y, 0.0, None)
    return Y


def ingest(x_path, y_path, args) -> Dataset:
    _, X = read_numeric_csv(x_path)
    _, Yraw = read_numeric_csv(y_path)
    if X.shape[0] != Yraw.shape[0]:
        raise InputError(f"X has {X.shape[0]} rows but Y has {Yraw.shape[0]}")
    space = build_space(args, Yraw)
    Y = decode_responses(space, Yraw)
    try:
        return Dataset(X, Y, space, validate=False)
    except FrechetError as exc:
        raise InputError(str(exc)) from exc


def parse_index_list(text: str, p: int) -> list[int]:
    """1-based comma-separated indices to 0-based."""
    try:
        idx = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise InputError(f"--base must be a comma-separated list of integers, got {text!r}")
    if not idx:
        raise InputError("--base is empty")
    if min(idx) < 1 or max(idx) > p:
        raise InputError(f"--base indices must lie in 1..{p}")
    if len(set(idx)) != len(idx):
        raise InputError("--base has duplicate indices")
    if len(idx) >= p:
        raise InputError("--base must leave at least one predictor to test")
    return [i - 1 for i in idx]


def _space_config(space) -> dict:
    cfg = {"space": space.kind.value}
    for name in ("dim", "m", "edge_bound", "M", "lo", "hi"):
        if hasattr(space, name):
            cfg[name] = getattr(space, name)
    return cfg


# -- commands -----------------------------------------------------------------------

def cmd_test(args, manifest) -> int:
    data = ingest(args.x, args.y, args)
    cfg = MultiplierConfig(K=args.K, seed=args.seed)
    manifest["config"].update(_space_config(data.space), K=args.K, alpha=args.alpha,
                              test=args.kind, n=data.n, p=data.p)
    if args.kind == "global":
        report = test_global(data, cfg)
    else:
        if args.base is None:
            raise InputError("--base is required for a partial test")
        base = parse_index_list(args.base, data.p)
        manifest["config"]["base"] = [i + 1 for i in base]
        report = test_partial(data, base, cfg)
        report.diagnostics["base"] = [i + 1 for i in report.diagnostics["base"]]
        report.diagnostics["added"] = [i + 1 for i in report.diagnostics["added"]]
    out = report.to_dict()
    out["diagnostics"]["rejected"] = bool(report.p_value <= args.alpha)
    out["diagnostics"]["alpha"] = args.alpha
    _write_text(args.out, _dump_json(out))
    manifest["diagnostics"] = {k: out["diagnostics"][k]
                               for k in ("all_converged", "degenerate", "max_iterations")}
    return EXIT_OK


def _parse_effects(text):
    effects = []
    for item in text.split(","):
        try:
            b, g = item.split(":")
            effects.append((float(b), float(g)))
        except ValueError:
            raise InputError(f"--effects items must look like beta:gamma, got {item!r}")
    return effects


def cmd_simulate(args, manifest) -> int:
    if args.preset not in PRESETS:
        raise InputError(f"unknown preset {args.preset!r}; choose from {', '.join(sorted(PRESETS))}")
    try:
        ns = [int(v) for v in args.n.split(",")]
    except ValueError:
        raise InputError(f"--n must be a comma-separated list of integers, got {args.n!r}")
    effects = _parse_effects(args.effects) if args.effects else None
    try:
        cells = preset_cells(args.preset, ns, m=args.m or 10, effects=effects)
    except FrechetError as exc:
        raise InputError(str(exc)) from exc
    result = run_power_study(cells, B=args.B, alpha=args.alpha, K=args.K, seed=args.seed,
                             workers=args.threads if args.threads else (os.cpu_count() or 1))
    rows = result.rows()
    header = list(rows[0].keys())
    for r in rows[1:]:
        header += [k for k in r if k not in header]
    write_csv(args.out, header, [[r.get(k, "") for k in header] for r in rows])
    manifest["config"].update(preset=args.preset, n=ns, B=args.B, K=args.K, alpha=args.alpha,
                              cells=[config_dict(c) for c in cells])
    manifest["diagnostics"] = {"failures": result.failures}
    return EXIT_OK if result.failures == 0 else EXIT_SOLVER


def _emit_points(path, space, points):
    rows = space.to_rows(points)
    header = [f"y{j + 1}" for j in range(rows.shape[1])]
    write_csv(path, header, rows.tolist())


def _sidecar_path(out, suffix):
    if out is None or str(out) == "-":
        return None
    return str(out) + suffix


def cmd_fit(args, manifest) -> int:
    data = ingest(args.x, args.y, args)
    model = fit(data)
    terms = objective_matrix(model)
    fitted = model.training_fit
    _emit_points(args.out, data.space, fitted.points)
    summary = {
        "r_squared": r_squared_global(terms.a, terms.b),
        "n": data.n,
        "p": data.p,
        "xbar": model.xbar.tolist(),
        "sigma_inv": model.sigma_inv.tolist(),
        "all_converged": bool(fitted.all_converged),
    }
    side = _sidecar_path(args.out, ".summary.json")
    if side is not None:
        _write_text(side, _dump_json(summary))
    manifest["config"].update(_space_config(data.space), n=data.n, p=data.p)
    manifest["diagnostics"] = {"all_converged": summary["all_converged"]}
    return EXIT_OK


def cmd_predict(args, manifest) -> int:
    data = ingest(args.x, args.y, args)
    _, Q = read_numeric_csv(args.query)
    if Q.shape[1] != data.p:
        raise InputError(f"query file has {Q.shape[1]} columns, X has {data.p}")
    if not np.all(np.isfinite(Q)):
        raise InputError("query file has non-finite values")
    model = fit(data)
    res = model.solve(Q)
    _emit_points(args.out, data.space, res.points)
    terms = objective_matrix(model)
    summary = {"r_squared": r_squared_global(terms.a, terms.b), "n": data.n, "p": data.p,
               "queries": int(Q.shape[0]), "all_converged": bool(res.all_converged)}
    side = _sidecar_path(args.out, ".summary.json")
    if side is not None:
        _write_text(side, _dump_json(summary))
    manifest["config"].update(_space_config(data.space), n=data.n, p=data.p,
                              queries=int(Q.shape[0]))
    manifest["diagnostics"] = {"all_converged": summary["all_converged"]}
    return EXIT_OK


def cmd_replay(args, manifest) -> int:
    try:
        recorded = json.loads(Path(args.manifest_file).read_text(encoding="utf-8"))
        argv = recorded["argv"]
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(f"cannot read manifest {args.manifest_file}: {exc}") from exc
    return main(argv)


# -- parser ---------------------------------------------------------------------------

def _add_data_args(p, responses=True):
    p.add_argument("--x", required=True, help="predictor CSV (header row, numeric columns)")
    p.add_argument("--y", required=True, help="response CSV, encoded per --space")
    p.add_argument("--space", required=True,
                   choices=["euclidean", "sphere", "laplacian", "simplex", "wasserstein"])
    p.add_argument("--m", type=int, help="number of nodes (laplacian)")
    p.add_argument("--edge-bound", type=float, dest="edge_bound",
                   help="edge weight bound C (laplacian; default: largest observed weight)")
    p.add_argument("--M", type=int, help="number of quantile levels (wasserstein)")
    p.add_argument("--lo", type=float, help="lower end of the distribution domain (wasserstein)")
    p.add_argument("--hi", type=float, help="upper end of the distribution domain (wasserstein)")


def _add_common(p):
    p.add_argument("--seed", type=int, help="random seed (default: drawn and recorded)")
    p.add_argument("--threads", type=int, default=0, help="worker processes (0 = auto)")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--manifest", help="run manifest path (default: <out>.manifest.json)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="frechet-infer", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="global or partial significance test")
    p.add_argument("kind", choices=["global", "partial"])
    _add_data_args(p)
    p.add_argument("--K", type=int, default=50, help="number of multiplier randomisations")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--base", help="1-based base-model predictor columns, e.g. 1,3,4")
    _add_common(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("simulate", help="Monte Carlo size/power study")
    p.add_argument("--preset", required=True, help=f"one of {', '.join(sorted(PRESETS))}")
    p.add_argument("--n", default="300", help="sample size(s), comma separated")
    p.add_argument("--m", type=int, default=10, help="nodes per network")
    p.add_argument("--effects", help="override the effect grid: beta:gamma,beta:gamma,...")
    p.add_argument("--B", type=int, default=500, help="replications per cell")
    p.add_argument("--K", type=int, default=50)
    p.add_argument("--alpha", type=float, default=0.05)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fitted values at the training predictors")
    _add_data_args(p)
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predictions at query predictor values")
    _add_data_args(p)
    p.add_argument("--query", required=True, help="CSV of query predictor rows")
    _add_common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest_file")
    p.set_defaults(func=cmd_replay)
    return parser


def _configure_logging():
    level = os.environ.get("FRECHET_INFER_LOG", "error").lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s")


def _manifest_path(args):
    if getattr(args, "manifest", None):
        return args.manifest
    if getattr(args, "out", None) and args.out != "-":
        return str(args.out) + ".manifest.json"
    return "run.manifest.json"


def main(argv=None) -> int:
    _configure_logging()
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "replay":
        try:
            return cmd_replay(args, None)
        except InputError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT

    if args.seed is None:
        args.seed = secrets.randbits(63)
        argv = argv + ["--seed", str(args.seed)]
    manifest = {
        "command": args.command,
        "argv": argv,
        "config": {},
        "seed": args.seed,
        "version": __version__,
        "backend": BACKEND,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "duration_s": None,
        "diagnostics": {},
        "exit_code": None,
    }
    t0 = time.perf_counter()
    try:
        code = args.func(args, manifest)
    except (InputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_INPUT
    except (DegenerateGeometryError, SolverError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        code = EXIT_SOLVER
    except FrechetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_INPUT
    manifest["duration_s"] = time.perf_counter() - t0
    manifest["exit_code"] = code
    Path(_manifest_path(args)).write_text(_dump_json(manifest), encoding="utf-8")
    return code


if __name__ == "__main__":
    sys.exit(main())
