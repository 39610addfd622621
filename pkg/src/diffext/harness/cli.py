"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from ..errors import ConfigError, NumericalError
from ..extender import extend_batch, fit
from ..online import EvaluationCache, evaluate_cached, update
from ..tomo.io import read_mxf, write_mxf
from .config import ExperimentConfig, build_config, load_config_file
from .experiments import run_ct, run_spiral
from .persistence import load_model, save_model

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERICAL = 0, 2, 3, 4

log = logging.getLogger("diffext")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def read_matrix(path) -> np.ndarray:
    """Load an MXF file, or a text/CSV matrix for any other extension."""
    path = Path(path)
    if path.suffix.lower() == ".mxf":
        return read_mxf(path)
    delimiter = "," if path.suffix.lower() == ".csv" else None
    try:
        return np.atleast_2d(np.loadtxt(path, delimiter=delimiter, ndmin=2))
    except ValueError as exc:
        raise ConfigError(f"{path}: cannot parse matrix: {exc}") from exc


def write_matrix(path, matrix) -> None:
    path = Path(path)
    if path.suffix.lower() == ".mxf":
        write_mxf(path, matrix)
    else:
        delimiter = "," if path.suffix.lower() == ".csv" else " "
        np.savetxt(path, np.atleast_2d(matrix), delimiter=delimiter, fmt="%.17g")


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value file; flags override it")
    for f in dataclasses.fields(ExperimentConfig):
        if f.name == "experiment":
            continue
        flag = "--M" if f.name == "M" else "--" + f.name.replace("_", "-")
        p.add_argument(flag, dest=f.name, default=None, metavar=f.name.upper())


def _add_fit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n-bar", type=int, default=2)
    p.add_argument("--m-reference", type=int, default=50)
    p.add_argument("--M", type=float, default=1.0, help="hypercube half-width")
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="diffext", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name in ("spiral", "ct"):
        _add_experiment_flags(sub.add_parser(name, help=f"run the {name} experiment"))

    p = sub.add_parser("fit", help="fit a model from sample points and values")
    p.add_argument("--points", required=True)
    p.add_argument("--values", required=True)
    p.add_argument("--model", required=True, help="output model file")
    _add_fit_flags(p)

    p = sub.add_parser("predict", help="evaluate a model at query points")
    p.add_argument("--model", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cache", action="store_true",
                   help="store the queries in the model's evaluation cache (ids from --ids or row numbers)")
    p.add_argument("--ids", help="text file with one cache identifier per query row")

    p = sub.add_parser("update", help="add samples to a model and its cache")
    p.add_argument("--model", required=True)
    p.add_argument("--points", required=True)
    p.add_argument("--values", required=True)
    p.add_argument("--out", help="output model file (default: overwrite --model)")

    p = sub.add_parser("info", help="describe a model file")
    p.add_argument("--model", required=True)
    return parser


def _cmd_experiment(args) -> None:
    file_values = load_config_file(args.config) if args.config else {}
    overrides = {f.name: getattr(args, f.name) for f in dataclasses.fields(ExperimentConfig)
                 if f.name != "experiment"}
    overrides["experiment"] = args.command
    cfg = build_config(file_values, overrides)
    runner = run_spiral if cfg.experiment == "spiral" else run_ct
    result = runner(cfg)
    for r in result.reports:
        print(f"{r.method:>20s}  batch={r.batch:<5d} error={r.error:.6f}")


def _cmd_fit(args) -> None:
    X = read_matrix(args.points)
    V = read_matrix(args.values)
    if V.shape[0] == 1 and V.shape[1] == X.shape[0] and X.shape[0] > 1:
        V = V.T
    model = fit(X, V, args.n_bar, args.m_reference, args.M, args.delta, args.seed)
    save_model(model, None, args.model)
    print(f"fitted k={model.k} n={model.n} n_bar={model.n_bar} p={model.p} -> {args.model}")


def _cmd_predict(args) -> None:
    model, cache = load_model(args.model)
    Q = read_matrix(args.queries)
    if not args.cache:
        out = extend_batch(Q, model)
    else:
        if args.ids:
            ids = Path(args.ids).read_text().split()
            if len(ids) != Q.shape[0]:
                raise ConfigError(f"{args.ids} has {len(ids)} ids for {Q.shape[0]} queries")
        else:
            ids = [str(i) for i in range(Q.shape[0])]
        cache = cache if cache is not None else EvaluationCache()
        out = np.array([evaluate_cached(key, q, model, cache) for key, q in zip(ids, Q)])
        save_model(model, cache, args.model)
    if not np.all(np.isfinite(out)):
        raise NumericalError("prediction produced non-finite values")
    write_matrix(args.out, out)


def _cmd_update(args) -> None:
    model, cache = load_model(args.model)
    P = read_matrix(args.points)
    V = read_matrix(args.values)
    if V.shape[0] == 1 and V.shape[1] == P.shape[0] and P.shape[0] > 1:
        V = V.T
    work = cache if cache is not None else EvaluationCache()
    model, work = update(model, work, P, V)
    save_model(model, cache if cache is None else work, args.out or args.model)
    print(f"model now holds k={model.k} samples; {len(work)} cached queries updated")


def _cmd_info(args) -> None:
    model, cache = load_model(args.model)
    s = model.basis.singular_values
    print(f"k = {model.k}")
    print(f"n = {model.n}")
    print(f"n_bar = {model.n_bar}")
    print(f"p = {model.p}")
    print(f"delta = {model.delta!r}")
    print(f"M = {model.M!r}")
    print("singular_values = " + " ".join(f"{v:.6g}" for v in s))
    print(f"cached_queries = {0 if cache is None else len(cache)}")


COMMANDS = {
    "spiral": _cmd_experiment,
    "ct": _cmd_experiment,
    "fit": _cmd_fit,
    "predict": _cmd_predict,
    "update": _cmd_update,
    "info": _cmd_info,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"diffext: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        # ModelFormatError is an OSError
        print(f"diffext: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"diffext: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
