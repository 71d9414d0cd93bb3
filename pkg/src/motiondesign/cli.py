"""Command line front end.

Exit codes: 0 success, 1 divergence or failed checks, 2 input error.
"""

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import benchmarks, brachistochrone, report, verify
from .functional import discretize
from .model import PREDICTORS, PathSpec, ProblemError, load_problem
from .solver import DivergenceError

EXIT_OK, EXIT_DIVERGED, EXIT_INPUT = 0, 1, 2


def resolve_problem(name):
    """A file path, or the name of a shipped example (``two_bar_truss``, ``examples/two_bar_truss``)."""
    path = Path(name)
    if path.is_file():
        return path
    stem = path.name[:-5] if path.name.endswith(".json") else path.name
    shipped = benchmarks.PROBLEM_DIR / f"{stem}.json"
    if shipped.is_file() and (path.parent in (Path("."), Path("examples"))):
        return shipped
    return path  # load_problem reports the missing file


def apply_overrides(problem, args):
    if args.path_elements is not None or args.degree is not None:
        problem = problem.with_path(n_elements=args.path_elements, degree=args.degree)
    if args.tol is not None:
        problem = replace(problem, solver=replace(problem.solver, tolerance=args.tol))
    if args.predictor is not None:
        problem = replace(problem, predictor=replace(problem.predictor, kind=args.predictor))
    return problem


def cmd_run(args):
    try:
        problem = apply_overrides(load_problem(resolve_problem(args.problem)), args)
        discretize(problem)
    except ProblemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    out_dir = args.output or f"out_{problem.name or 'run'}"
    try:
        rep = report.run_problem(problem)
    except DivergenceError as exc:
        report.write_history(exc.history, out_dir)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except ValueError as exc:  # the predictor path cannot be evaluated (e.g. inverted elements)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    out = report.write_outputs(rep, out_dir)
    sol = rep.solution
    status = "converged" if rep.converged else f"NOT converged ({rep.error})"
    print(f"{problem.name}: {status} after {sol.iterations} iterations, "
          f"J = {sol.J:.6g} (predictor {rep.J_predictor:.6g}), results in {out}")
    return EXIT_OK if rep.converged else EXIT_DIVERGED


def cmd_verify(args):
    checks = verify.run_all()
    print(verify.format_table(checks))
    return EXIT_OK if all(c.passed for c in checks) else EXIT_DIVERGED


def _brach_problem(args):
    return brachistochrone.BrachProblem(tuple(args.A), tuple(args.B), args.g)


def _emit(rows, header, output):
    fh = open(output, "w", newline="", encoding="utf-8") if output else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if output:
            fh.close()


def cmd_brach(args):
    try:
        problem = _brach_problem(args)
        if args.mode == "exact":
            sol = brachistochrone.solve_exact(problem)
            t, pts = sol.sample(args.samples)
            print(f"C1 = {sol.C1:.6g}, C2 = {sol.C2:.6g}, t_E = {sol.t_E:.6g}, T = {sol.time:.8g}",
                  file=sys.stderr)
            _emit([[repr(float(a)), repr(float(x)), repr(float(y))] for a, (x, y) in zip(t, pts)], ["t", "x", "y"], args.output)
            return EXIT_OK
        spec = PathSpec(args.kind, args.degree, args.elements)
        fe = brachistochrone.solve_fe(problem, spec)
    except brachistochrone.BrachError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    _, sbar = brachistochrone.fe_curve(fe.problem, fe.motion.D)
    T_exact = brachistochrone.solve_exact(problem).time if problem.run else float("nan")
    print(f"T = {fe.T:.8g} (exact {T_exact:.8g}), {fe.motion.iterations} iterations, "
          f"{'converged' if fe.converged else 'NOT converged'}", file=sys.stderr)
    _emit([[repr(float(s)), repr(float(x)), repr(float(y))] for s, (x, y) in zip(sbar, fe.curve)], ["sbar", "x", "y"], args.output)
    return EXIT_OK if fe.converged else EXIT_DIVERGED


def build_parser():
    parser = argparse.ArgumentParser(prog="motiondesign", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0, help="log solver iterations")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve a motion design problem")
    run.add_argument("problem", help="problem file or shipped example name")
    run.add_argument("-o", "--output", help="output directory (default out_<name>)")
    run.add_argument("--path-elements", type=int)
    run.add_argument("--degree", type=int)
    run.add_argument("--tol", type=float)
    run.add_argument("--predictor", choices=PREDICTORS)
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify", help="run the self-check table")
    ver.set_defaults(func=cmd_verify)

    br = sub.add_parser("brach", help="curve of fastest descent")
    br.add_argument("mode", choices=("exact", "fe"))
    br.add_argument("--A", type=float, nargs=2, default=(1.0, 5.0), metavar=("X", "Y"))
    br.add_argument("--B", type=float, nargs=2, default=(10.0, 2.0), metavar=("X", "Y"))
    br.add_argument("--g", type=float, default=10.0)
    br.add_argument("--kind", choices=("lagrange", "bspline"), default="lagrange")
    br.add_argument("--degree", type=int, default=1)
    br.add_argument("--elements", type=int, default=15)
    br.add_argument("--samples", type=int, default=201)
    br.add_argument("-o", "--output", help="CSV file (default stdout)")
    br.set_defaults(func=cmd_brach)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
