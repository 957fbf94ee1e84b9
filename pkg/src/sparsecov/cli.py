"""Command-line entry point: ``sparsecov {estimate,select-alpha,simulate,compare}``.

Exit status is 0 on success, 1 for usage, parse and input errors and 2
when a fit fails numerically.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .bcd import BcdConfig, bcd_fit
from .core import as_data_matrix, sample_covariance
from .errors import InputError, SparseCovError
from .experiment import ESTIMATORS, run_experiment
from .fdr import FdrConfig, edge_count, fdr_pattern, pattern_to_dot, pattern_to_json, screening_statistics, support
from .pd import PdConfig, pd_fit
from .selection import DEFAULT_GRID, ebic_score, select_alpha
from .synth import TruthSpec

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2

log = logging.getLogger("sparsecov")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 by default, which is reserved here for numerical failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt_float(x) -> str:
    return "%.17g" % x


def read_data_csv(path, transpose: bool = False) -> tuple[np.ndarray, list[str] | None]:
    """Read a numeric CSV whose rows are samples and columns are variables.

    A first row containing any non-numeric cell is treated as a header.
    Returns the ``p x n`` data matrix (or ``n x p`` read as-is when
    ``transpose`` is set, i.e. the file already has variables as rows)
    together with the column names if present.
    """
    rows: list[list[float]] = []
    header = None
    width = None
    with open(path, newline="") as fh:
        for lineno, raw in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in raw]
            if not cells or all(c == "" for c in cells):
                continue
            try:
                values = [float(c) for c in cells]
            except ValueError:
                if header is None and not rows:
                    header = cells
                    width = len(cells)
                    continue
                bad = next(c for c in cells if not _is_float(c))
                raise InputError(f"{path}: line {lineno}: cannot parse {bad!r} as a number") from None
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise InputError(f"{path}: line {lineno}: expected {width} fields, found {len(values)}")
            if not all(np.isfinite(values)):
                raise InputError(f"{path}: line {lineno}: non-finite value")
            rows.append(values)
    if not rows:
        raise InputError(f"{path}: no data rows")
    X = np.asarray(rows, dtype=float)
    Y = X if transpose else X.T
    if transpose:
        header = None
    return Y, header


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def write_matrix_csv(path, A: np.ndarray) -> None:
    np.savetxt(path, A, fmt="%.17g", delimiter=",")


def read_matrix_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def parse_grid(text: str | None):
    """``start:stop:step`` (inclusive), or a comma-separated list of levels."""
    if text is None:
        return DEFAULT_GRID
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            grid = tuple(float(x) for x in np.round(start + step * np.arange(count), 12))
        else:
            grid = tuple(sorted(float(x) for x in text.split(",")))
    except ValueError:
        raise UsageError(f"bad grid specification {text!r}") from None
    if not grid or any(not 0 < a < 1 for a in grid):
        raise UsageError("grid levels must lie in (0, 1)")
    return grid


def _solver_cfg(args):
    if args.solver == "pd":
        given = {k: v for k, v in (("zeta", args.zeta), ("epsilon", args.epsilon), ("max_iters", args.max_iters))
                 if v is not None}
        if args.fixed_steps:
            given["inner_tol"] = None
        return PdConfig(**given)
    if args.zeta is not None or args.fixed_steps:
        raise UsageError("--zeta and --fixed-steps apply only to --solver pd")
    return BcdConfig(
        epsilon=args.epsilon if args.epsilon is not None else 1e-7,
        max_sweeps=args.max_iters if args.max_iters is not None else 500,
        seed=args.seed,
    )


def _load_cov(args):
    Y, names = read_data_csv(args.input, transpose=args.transpose)
    return sample_covariance(as_data_matrix(Y), center=args.center), names


def _fit_fixed(S, alpha, args, cfg):
    Z = fdr_pattern(screening_statistics(S), FdrConfig(alpha=alpha, two_sided=not args.one_sided))
    if args.solver == "bcd":
        est = bcd_fit(S, Z, cfg)
    else:
        est = pd_fit(S, Z, cfg)
        if "failure" in est.info:
            raise SparseCovError(est.info["failure"])
    est.alpha = alpha
    return Z, est


def cmd_estimate(args) -> int:
    cfg = _solver_cfg(args)
    if args.alpha is not None and args.grid is not None:
        raise UsageError("--alpha and --grid are mutually exclusive")
    if args.alpha is not None and not 0 < args.alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    grid = parse_grid(args.grid)
    S, names = _load_cov(args)
    path_report = None
    if args.alpha is not None:
        Z, est = _fit_fixed(S, args.alpha, args, cfg)
    else:
        alpha, est, path_report = select_alpha(S, grid=grid, solver=args.solver, cfg=cfg,
                                                two_sided=not args.one_sided)
        Z = fdr_pattern(screening_statistics(S), FdrConfig(alpha=alpha, two_sided=not args.one_sided))

    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(out / "estimate.csv", est.sigma)
    graph = ((Z != 0) & (support(est.sigma) != 0)).astype(np.int8)
    (out / "graph.dot").write_text(pattern_to_dot(graph, names))
    (out / "pattern.json").write_text(pattern_to_json(Z) + "\n")
    report = {
        "solver": args.solver,
        "p": S.p,
        "n": S.n,
        "alpha": est.alpha,
        "objective": est.objective,
        "iterations": est.iterations,
        "converged": est.converged,
        "m": edge_count(est.sigma),
        "pattern_edges": edge_count(Z),
        "ebic": ebic_score(est.sigma, S.S, S.n),
        "trace": [float(v) for v in est.trace],
        "ebic_path": path_report.to_dict() if path_report is not None else None,
    }
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    print(f"alpha={est.alpha} m={report['m']} objective={fmt_float(est.objective)} "
          f"converged={est.converged} -> {out}")
    return EXIT_OK


def cmd_select_alpha(args) -> int:
    cfg = _solver_cfg(args)
    grid = parse_grid(args.grid)
    S, _ = _load_cov(args)
    _, _, report = select_alpha(S, grid=grid, solver=args.solver, cfg=cfg, two_sided=not args.one_sided)
    text = report.to_json(indent=2) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    return str(v)


def write_trials_csv(path, result) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(result.fields)
        for row in result.rows:
            w.writerow([_csv_cell(row.get(k)) for k in result.fields])


def _print_summary(summary) -> None:
    print(f"{'estimator':<12} {'ok':>4} {'fail':>4} {'NRMSE':>20} {'MCC':>20}")
    for name, e in summary["estimators"].items():
        def pm(key):
            m = e[f"{key}_mean"]
            return "n/a" if m is None else f"{m:.4f} +/- {e[f'{key}_stderr']:.4f}"
        print(f"{name:<12} {e['trials'] - e['failures']:>4} {e['failures']:>4} {pm('nrmse'):>20} {pm('mcc'):>20}")


def cmd_simulate(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    estimators = [e.strip() for e in args.estimators.split(",") if e.strip()]
    unknown = [e for e in estimators if e not in ESTIMATORS]
    if unknown or not estimators:
        raise UsageError(f"unknown estimators {unknown}; choose from {', '.join(ESTIMATORS)}")
    try:
        spec = TruthSpec(p=args.p, sparsity=args.sparsity, cond=args.cond, seed=args.seed)
        if args.n < 3:
            raise InputError("-n must be >= 3")
    except InputError as exc:
        raise UsageError(str(exc)) from None
    grid = parse_grid(args.grid)
    result = run_experiment(spec, args.n, args.trials, estimators, grid=grid, jobs=args.jobs,
                            timings=args.timings)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_trials_csv(out / "trials.csv", result)
    (out / "summary.json").write_text(json.dumps(result.summary, indent=2) + "\n")
    _print_summary(result.summary)
    return EXIT_OK


def _add_fit_options(sp, with_alpha: bool):
    sp.add_argument("input", help="CSV file, rows are samples and columns are variables")
    if with_alpha:
        sp.add_argument("--alpha", type=float, help="fixed FDR level (skips EBIC selection)")
    sp.add_argument("--grid", help="alpha grid as start:stop:step or a comma list (default 0.005:0.1:0.005)")
    sp.add_argument("--solver", choices=("bcd", "pd"), default="bcd")
    sp.add_argument("--epsilon", type=float, help="relative-change stopping tolerance")
    sp.add_argument("--zeta", type=float, help="penalty growth factor (pd only)")
    sp.add_argument("--max-iters", type=int, dest="max_iters", help="sweep/iteration cap")
    sp.add_argument("--fixed-steps", action="store_true", dest="fixed_steps",
                    help="pd only: one MM step per penalty level instead of the adaptive schedule")
    sp.add_argument("--seed", type=int, help="seed for randomized initialization")
    sp.add_argument("--center", action="store_true", help="subtract column means before forming S")
    sp.add_argument("--transpose", action="store_true", help="file rows are variables instead of samples")
    sp.add_argument("--one-sided", action="store_true", dest="one_sided", help="one-sided correlation tests")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sparsecov", description="Sparse covariance estimation with FDR-screened patterns.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    est = sub.add_parser("estimate", help="screen, select alpha and fit; write estimate, report and graph")
    _add_fit_options(est, with_alpha=True)
    est.add_argument("outdir", help="directory for estimate.csv, report.json, graph.dot, pattern.json")
    est.set_defaults(func=cmd_estimate)

    sel = sub.add_parser("select-alpha", help="print the EBIC path over the alpha grid as JSON")
    _add_fit_options(sel, with_alpha=False)
    sel.add_argument("-o", "--output", help="write JSON here instead of stdout")
    sel.set_defaults(func=cmd_select_alpha)

    for name, default_est, help_ in (
        ("simulate", "scm,bcd", "Monte Carlo run on synthetic sparse truths"),
        ("compare", ",".join(ESTIMATORS), "same as simulate, comparing all estimators by default"),
    ):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("-p", type=int, default=30, help="dimension")
        sp.add_argument("-n", type=int, default=40, help="samples per trial")
        sp.add_argument("--sparsity", type=float, default=0.8)
        sp.add_argument("--cond", type=float, default=100.0)
        sp.add_argument("--trials", type=int, default=20)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--estimators", default=default_est, help=f"comma list from {','.join(ESTIMATORS)}")
        sp.add_argument("--grid", help="alpha grid for the FDR+EBIC estimators")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes for independent trials")
        sp.add_argument("--timings", action="store_true", help="add a runtime column (output no longer reproducible)")
        sp.add_argument("--out", default="results", help="directory for trials.csv and summary.json")
        sp.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"sparsecov: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, OSError) as exc:
        print(f"sparsecov: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SparseCovError as exc:
        diag = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        print(json.dumps(diag), file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
