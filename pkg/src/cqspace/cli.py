"""Command-line interface.

Subcommands: ``simulate``, ``estimate``, ``project``, ``metrics`` and
``consistency``.  Exit status is 0 on success, 1 on a runtime failure and 2
on a usage error.

Every subcommand accepts ``--config FILE``: a flat ``key = value`` text file
whose keys are long option names (``bandwidth-scale`` or
``bandwidth_scale``).  Command-line flags override the file, which overrides
the built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .cqs import cqs
from .data import DataError, atomic_write_text, load_dataset, normal_scores, read_numeric_csv, whiten, write_matrix_csv
from .metrics import distance_measure, trace_correlation
from .sir import DEFAULT_SLICES, SirConfig
from .simulation import METHODS, MODELS, PREDICTOR_DISTS, ModelSpec, consistency_sweep, reports_to_csv, run_replications
from .tcqs import empirical_normal_scores, tcqs_basis


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument types


def _tau(text: str) -> float:
    t = float(text)
    if not 0.0 < t < 1.0:
        raise argparse.ArgumentTypeError(f"tau must lie in (0, 1), got {text}")
    return t


def _list_of(kind):
    def parse(text: str):
        try:
            return [kind(v.strip()) for v in str(text).split(",") if v.strip()]
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    parse.__name__ = f"list of {kind.__name__}"
    return parse


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _choices(options):
    def parse(text: str):
        vals = [v.strip() for v in str(text).split(",") if v.strip()]
        bad = [v for v in vals if v not in options]
        if bad or not vals:
            raise argparse.ArgumentTypeError(f"invalid choice {bad or text!r}; choose from {', '.join(options)}")
        return vals
    parse.__name__ = "choice"
    return parse


def _model(text: str) -> str:
    if text not in MODELS:
        raise argparse.ArgumentTypeError(f"unknown model {text!r}; choose from {', '.join(MODELS)}")
    return text


def read_config(path: str) -> dict[str, str]:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    out = {}
    for i, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}: line {i}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser, stochastic: bool = True) -> None:
    p.add_argument("--config", help="flat key = value file providing defaults for any option")
    p.add_argument("--slices", type=_positive_int, default=DEFAULT_SLICES, help="SIR slice count")
    p.add_argument("--bandwidth-scale", type=_positive_float, default=1.0, help="multiplier on the automatic bandwidth")
    if stochastic:
        p.add_argument("--seed", type=_seed, default=0, help="64-bit base seed")
        p.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1,
                       help="worker processes (results do not depend on it)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cqspace", description="Central quantile subspace estimation and benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="Monte Carlo DM/TCC table for a benchmark model")
    s.add_argument("--model", type=_model, required=True, help=f"one of {', '.join(MODELS)}")
    s.add_argument("--n", type=int, default=600)
    s.add_argument("--p", type=int, default=10)
    s.add_argument("--dist", choices=PREDICTOR_DISTS, default="normal", help="predictor distribution")
    s.add_argument("--tau", type=_list_of(_tau), default=[0.5], help="comma-separated quantile levels")
    s.add_argument("--method", type=_choices(METHODS), default=["tcqs"], help="comma-separated: cqs, tcqs")
    s.add_argument("--reps", type=_positive_int, default=50)
    s.add_argument("--out", help="results CSV (default: stdout)")
    _common(s)

    e = sub.add_parser("estimate", help="estimate a basis from a CSV dataset")
    e.add_argument("--data", required=True, help="CSV with a header row")
    e.add_argument("--response", default="y", help="name of the response column")
    e.add_argument("--tau", type=_tau, default=0.5)
    e.add_argument("--d", type=_positive_int, default=1, help="subspace dimension")
    e.add_argument("--method", choices=METHODS, default="tcqs")
    e.add_argument("--sir-dim", type=_positive_int, help="dimension of the initial SIR basis (default: --d)")
    e.add_argument("--score-coordinates", action="store_true",
                   help="tcqs only: report the basis in raw normal-score rather than whitened coordinates")
    e.add_argument("--out", required=True, help="basis CSV")
    e.add_argument("--summary", help="JSON summary (default: <out>.json)")
    _common(e, stochastic=False)

    pr = sub.add_parser("project", help="sufficient predictors of a test set")
    pr.add_argument("--basis", required=True, help="basis CSV from 'estimate'")
    pr.add_argument("--train", required=True)
    pr.add_argument("--test", required=True)
    pr.add_argument("--response", default="y")
    pr.add_argument("--method", choices=METHODS, default="tcqs",
                    help="method that produced the basis (tcqs bases are in whitened-score coordinates)")
    pr.add_argument("--out", required=True, help="predictor CSV")
    pr.add_argument("--report", help="JSON correlation report (default: stdout only)")
    pr.add_argument("--config", help="flat key = value file")

    m = sub.add_parser("metrics", help="DM and TCC between two basis CSVs")
    m.add_argument("estimated")
    m.add_argument("truth")
    m.add_argument("--config", help="flat key = value file")

    c = sub.add_parser("consistency", help="mean DM against 1/sqrt(n)")
    c.add_argument("--model", type=_model, default="I")
    c.add_argument("--n-grid", type=_list_of(int), default=[400, 600, 800, 1000, 1200])
    c.add_argument("--p", type=int, default=10)
    c.add_argument("--dist", choices=PREDICTOR_DISTS, default="normal")
    c.add_argument("--tau", type=_tau, default=0.5)
    c.add_argument("--method", choices=METHODS, default="tcqs")
    c.add_argument("--reps", type=_positive_int, default=30)
    c.add_argument("--out", help="plot-data CSV (default: stdout)")
    _common(c)
    return parser


def _config_path(argv: list[str]) -> str | None:
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    path = _config_path(argv)
    command = next((tok for tok in argv if tok in COMMANDS), None)
    if path and command:
        try:
            cfg = read_config(path)
        except UsageError as exc:
            parser.error(str(exc))
        subparser = parser._subparsers._group_actions[0].choices[command]
        actions = {a.dest: a for a in subparser._actions}
        unknown = sorted(set(cfg) - set(actions) - {"config", "help"})
        if unknown:
            subparser.error(f"unknown config keys: {', '.join(unknown)}")
        cfg.pop("config", None)
        for key, value in cfg.items():
            action = actions[key]
            action.required = False
            if isinstance(action, argparse._StoreTrueAction):
                cfg[key] = value.lower() in ("1", "true", "yes", "on")
        # string defaults pass through each option's type, and flags still win
        subparser.set_defaults(**cfg)
    return parser.parse_args(argv)


# ---------------------------------------------------------------------------
# commands


def _emit(text: str, path: str | None) -> None:
    if path:
        atomic_write_text(path, text)
    else:
        sys.stdout.write(text)


def cmd_simulate(args) -> int:
    try:
        spec = ModelSpec(args.model, n=args.n, p=args.p, predictor_dist=args.dist, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    reports = run_replications(spec, args.tau, args.method, args.reps, n_slices=args.slices,
                               bandwidth_scale=args.bandwidth_scale, threads=args.threads)
    _emit(reports_to_csv(reports), args.out)
    for r in reports:
        if r.failures:
            print(f"warning: {r.method} tau={r.tau}: {r.failures} of {r.n_reps} replications failed", file=sys.stderr)
    return 0


def cmd_estimate(args) -> int:
    data = load_dataset(args.data, args.response)
    if args.d > data.p:
        raise UsageError(f"--d {args.d} exceeds the number of predictors ({data.p})")
    sir_dim = args.sir_dim or args.d
    if sir_dim > data.p:
        raise UsageError(f"--sir-dim {sir_dim} exceeds the number of predictors ({data.p})")
    config = SirConfig(target_dim=sir_dim, n_slices=args.slices)
    if args.method == "tcqs":
        res = tcqs_basis(data, args.tau, args.d, config, bandwidth_scale=args.bandwidth_scale)
        basis = res.score_basis() if args.score_coordinates else res.basis.basis
        state = res.state
        coords = "scores" if args.score_coordinates else "whitened_scores"
    else:
        est, state = cqs(data.x, data.y, args.tau, args.d, config, bandwidth_scale=args.bandwidth_scale)
        basis = est.basis
        coords = "predictors"
    header = [f"dir{k + 1}" for k in range(args.d)]
    write_matrix_csv(args.out, basis, header)
    summary = {
        "method": args.method, "tau": args.tau, "d": args.d, "n": data.n, "p": data.p,
        "eigenvalues": [float(v) for v in state.eigenvalues],
        "columns": data.names, "response": data.response_name,
        "basis_columns": header, "coordinates": coords, "notes": state.notes,
    }
    atomic_write_text(args.summary or args.out + ".json", json.dumps(summary, indent=2) + "\n")
    return 0


def _pearson(a, b) -> float:
    a = np.asarray(a, float) - np.mean(a)
    b = np.asarray(b, float) - np.mean(b)
    den = math.sqrt(float(a @ a) * float(b @ b))
    return float(a @ b) / den if den > 0 else math.nan


def cmd_project(args) -> int:
    basis = read_numeric_csv(args.basis)[1]
    train = load_dataset(args.train, args.response)
    header, body = read_numeric_csv(args.test)
    if body.shape[0] == 0:
        raise UsageError(f"{args.test}: test set has no data rows")
    if args.response not in header:
        raise UsageError(f"{args.test}: response column '{args.response}' not in header")
    j = header.index(args.response)
    test_names = [h for k, h in enumerate(header) if k != j]
    if test_names != train.names:
        raise UsageError(f"test columns {test_names} do not match training columns {train.names}")
    if basis.shape[0] != train.p:
        raise UsageError(f"basis has {basis.shape[0]} rows but data have {train.p} predictors")
    test_y = body[:, j]
    test_x = np.delete(body, j, axis=1)
    if args.method == "tcqs":
        design = whiten(normal_scores(train.x))
        z = (empirical_normal_scores(train.x, test_x) - design.center) @ design.inv_sqrt_sigma
    else:
        z = test_x
    pred = z @ basis
    header_out = [f"dir{k + 1}" for k in range(basis.shape[1])]
    write_matrix_csv(args.out, pred, header_out)
    report = {"m": int(pred.shape[0]), "d": int(pred.shape[1]),
              "correlations": {h: _pearson(pred[:, k], test_y) for k, h in enumerate(header_out)}}
    text = json.dumps(report, indent=2) + "\n"
    if args.report:
        atomic_write_text(args.report, text)
    sys.stdout.write(text)
    return 0


def cmd_metrics(args) -> int:
    est = read_numeric_csv(args.estimated)[1]
    truth = read_numeric_csv(args.truth)[1]
    if est.shape[0] != truth.shape[0] or est.shape[1] != truth.shape[1]:
        raise UsageError(f"bases must have equal shape, got {est.shape} and {truth.shape}")
    if est.shape[0] == 0:
        raise UsageError("basis files have no rows")
    out = {"dm": distance_measure(est, truth), "tcc": trace_correlation(est, truth)}
    sys.stdout.write(json.dumps(out) + "\n")
    return 0


def cmd_consistency(args) -> int:
    grid = args.n_grid
    if len(grid) < 3:
        raise UsageError("--n-grid needs at least 3 sample sizes")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise UsageError("--n-grid must be strictly increasing")
    try:
        ModelSpec(args.model, n=grid[0], p=args.p, predictor_dist=args.dist, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    res = consistency_sweep(args.model, grid, args.tau, args.reps, p=args.p, seed=args.seed, method=args.method,
                            predictor_dist=args.dist, threads=args.threads, n_slices=args.slices,
                            bandwidth_scale=args.bandwidth_scale)
    _emit(res.to_csv(), args.out)
    fit = {"slope": res.slope, "intercept": res.intercept, "r_squared": res.r_squared, "failures": res.failures}
    print(json.dumps(fit), file=sys.stderr if not args.out else sys.stdout)
    return 0


COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "project": cmd_project,
            "metrics": cmd_metrics, "consistency": cmd_consistency}


def main(argv: list[str] | None = None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"cqspace {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"cqspace {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"cqspace {args.command}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
