"""Command line: ``phibranch {solve,trace,degree,diagram}``.

Exit status is 0 on success, 1 on domain errors (no convergence, boundary
zeros, ...) and 2 on usage or configuration errors.  Diagnostics go to
standard error; branch data and diagrams go to files.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import catalog
from .config import PROBLEM_IDS, RunConfig, load_config
from .continuation import Quantity, classify_termination, trace_all
from .degree import Box, degree
from .errors import ConfigError, NoConvergence, PhiBranchError
from .model import StatePair
from .output import read_branch_csv, render_diagram_svg, write_branch_csv, write_solution_csv
from .solver import newton_solve, random_state

log = logging.getLogger("phibranch")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


# maps available to ``degree --map``; f0 is the problem's own f0(., 0)
NAMED_MAPS = {
    "identity": lambda p: np.asarray(p, dtype=float),
    "minus_identity": lambda p: -np.asarray(p, dtype=float),
    "h0_cubic": catalog.h0_cubic,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="phibranch", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more log output on stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def problem_args(p):
        p.add_argument("--config", type=Path, help="configuration file")
        p.add_argument("--problem", choices=PROBLEM_IDS, help="problem id (overrides the config)")
        p.add_argument("--n", type=int, help="number of grid nodes")
        p.add_argument("--seed", type=int, help="random seed (overrides config and environment)")
        p.add_argument("--output", type=Path, help="output directory")

    p = sub.add_parser("solve", help="one Newton solve at a given lambda")
    problem_args(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--starts", type=int, default=1, help="number of initial guesses (zero state, then random)")
    p.add_argument("--start-c1", type=float, default=0.5, help="C1 norm of the random initial guesses")

    p = sub.add_parser("trace", help="trace branches from all trivial pairs")
    problem_args(p)

    p = sub.add_parser("degree", help="Brouwer degree of f0(., 0) or a named map on a box")
    p.add_argument("--problem", choices=PROBLEM_IDS)
    p.add_argument("--config", type=Path)
    p.add_argument("--map", dest="map_name", default="f0", choices=("f0", *NAMED_MAPS))
    p.add_argument("--box", type=_floats, required=True, help="lo1,hi1[,lo2,hi2]")

    p = sub.add_parser("diagram", help="re-render a diagram from branch CSV files")
    p.add_argument("csv", nargs="+", type=Path)
    p.add_argument("--output", type=Path, default=Path("diagram.svg"))
    p.add_argument("--problem", choices=PROBLEM_IDS, help="take lambda interval and lambda-hat from this problem")
    p.add_argument("--lambda-interval", type=_floats)
    p.add_argument("--lambda-hat", type=float, action="append")
    p.add_argument("--ceiling", type=float)
    return parser


def _run_config(args) -> RunConfig:
    if args.config is not None:
        cfg = load_config(args.config)
        if args.problem is not None and args.problem != cfg.problem_id:
            raise UsageError(f"--problem {args.problem} disagrees with the config ({cfg.problem_id})")
    elif args.problem is not None:
        cfg = RunConfig(problem_id=args.problem)
    else:
        raise UsageError("either --config or --problem is required")
    cfg = cfg.with_environment(os.environ)
    updates = {}
    if getattr(args, "n", None) is not None:
        updates["grid_n"] = args.n
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "output", None) is not None:
        updates["output_dir"] = args.output
    return replace(cfg, **updates) if updates else cfg


def _cmd_solve(args) -> int:
    cfg = _run_config(args)
    ex = cfg.example()
    grid = cfg.grid(ex.problem.period)
    rng = np.random.default_rng(cfg.seed)
    guesses = [StatePair.zeros(grid, ex.problem.dim)]
    guesses += [random_state(grid, ex.problem.dim, ex.phi, args.start_c1, rng) for _ in range(args.starts - 1)]
    failures = []
    for k, guess in enumerate(guesses):
        try:
            pair = newton_solve(ex.problem, ex.phi, args.lam, guess, cfg.solver)
        except NoConvergence as exc:
            failures.append(exc)
            log.warning("start %d: %s", k, exc)
            continue
        print(
            f"lambda = {pair.lam!r} c1_norm = {pair.c1_norm!r} residual = {pair.residual_sup:.3e} "
            f"iterations = {pair.diagnostics['iterations']}"
        )
        if args.output is not None:
            cfg.output_dir.mkdir(parents=True, exist_ok=True)
            write_solution_csv(pair, ex.phi, cfg.output_dir / "solution.csv")
        return 0
    raise failures[-1]


def _cmd_trace(args) -> int:
    cfg = _run_config(args)
    ex = cfg.example()
    spec = cfg.domain(ex)
    grid = cfg.grid(ex.problem.period)
    starts, branches = trace_all(
        ex.problem, ex.phi, spec, ex.monitors, grid=grid, step=cfg.step, solver=cfg.solver, seed=cfg.seed
    )
    print(f"trivial pairs: {len(starts)}, total degree {starts.total_degree}", file=sys.stderr)
    for w in starts.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if not branches:
        raise PhiBranchError("no trivial pair with nonzero degree in the start box")
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    for k, b in enumerate(branches):
        name = "branch.csv" if k == 0 else f"branch_{k + 1}.csv"
        write_branch_csv(b, out / name)
        report = classify_termination(b, spec)
        print(
            f"branch {k + 1}: {len(b)} points, ends {b.ends[0]} / {b.ends[1]}, {report.scenario.value}, "
            f"max|lambda| = {report.max_abs_lambda:.6g}, max c1 = {report.max_c1:.6g}, "
            f"flagged = {report.flagged_points}",
            file=sys.stderr,
        )
    render_diagram_svg(branches, spec, out / "diagram.svg", title=f"{cfg.problem_id} branches")
    return 0


def _cmd_degree(args) -> int:
    try:
        box = Box.from_bounds(args.box)
    except ValueError as exc:
        raise UsageError(f"--box: {exc}") from None
    if args.map_name == "f0":
        if args.config is not None:
            ex = load_config(args.config).example()
        elif args.problem is not None:
            ex = catalog.make_example(args.problem)
        else:
            raise UsageError("degree of f0 needs --problem or --config")
        if ex.problem.dim != box.dim:
            raise UsageError(f"box has dimension {box.dim}, problem {ex.problem.dim}")
        fn = ex.problem.f0_slice
    else:
        fn = NAMED_MAPS[args.map_name]
    result = degree(fn, box)
    print(f"degree = {result.degree}")
    return 0


def _cmd_diagram(args) -> int:
    tables = [read_branch_csv(p) for p in args.csv]
    interval, hats, ceiling = None, args.lambda_hat, args.ceiling
    if args.problem is not None:
        ex = catalog.make_example(args.problem)
        interval = ex.problem.lambda_interval
        if hats is None:
            hats = [m.bound(0.0) for m in ex.monitors if m.quantity is Quantity.ABS_LAMBDA]
    if args.lambda_interval is not None:
        if len(args.lambda_interval) != 2:
            raise UsageError("--lambda-interval takes two numbers")
        interval = tuple(args.lambda_interval)
    render_diagram_svg(
        tables,
        None,
        args.output,
        lambda_interval=interval or (-np.inf, np.inf),
        lambda_hats=hats or (),
        c1_ceiling=ceiling,
    )
    return 0


COMMANDS = {"solve": _cmd_solve, "trace": _cmd_trace, "degree": _cmd_degree, "diagram": _cmd_diagram}


# options whose values may start with "-" (e.g. "--box -1,1,-1,1")
_VALUE_OPTIONS = ("--box", "--lambda-interval", "--lambda", "--lambda-hat", "--ceiling")


def _join_option_values(argv):
    out, it = [], iter(argv)
    for tok in it:
        if tok in _VALUE_OPTIONS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def run_command(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(_join_option_values(argv))
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PhiBranchError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
