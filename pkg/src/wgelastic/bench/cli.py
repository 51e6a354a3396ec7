"""Command-line entry point: ``wgelastic converge | locking | selftest``.

Tables go to stdout (or ``--out``).  On failure the process exits nonzero and
prints a one-line JSON summary to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from ..assembly import ALGORITHMS
from ..solver import SolverError
from .cases import ALIASES, CASES
from .convergence import run_convergence, run_locking_sweep
from .selftest import run_selftest
from .tables import FORMATS, emit_table

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def parse_levels(text: str) -> list[int]:
    """``"8,16,32"`` or an inclusive range ``"2..6"``."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad level list {text!r}") from None


def parse_floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def parse_algorithms(text: str) -> list[str]:
    algs = [t.strip() for t in text.split(",") if t.strip()]
    bad = [a for a in algs if a not in ALGORITHMS]
    if bad or not algs:
        raise argparse.ArgumentTypeError(f"algorithms must be drawn from {ALGORITHMS}, got {text!r}")
    return algs


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--case", required=True, choices=sorted(CASES) + sorted(ALIASES))
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--levels", type=parse_levels, required=True,
                   help="1/h values in 2D or refinement levels in 3D, e.g. 8,16,32 or 2..6")
    p.add_argument("--quad-rhs", type=int, default=4, help="quadrature degree of the load vector")
    p.add_argument("--quad-err", type=int, default=6, help="quadrature degree of projections and errors")
    p.add_argument("--tol", type=float, default=1e-12, help="relative residual tolerance")
    p.add_argument("--format", choices=FORMATS, default="markdown")
    p.add_argument("--out", help="write the table here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wgelastic", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-level progress")
    sub = parser.add_subparsers(dest="command", required=True)

    conv = sub.add_parser("converge", help="errors and observed orders over a mesh sequence")
    _add_run_options(conv)
    conv.add_argument("--algorithm", choices=ALGORITHMS, default="new")
    conv.add_argument("--lambda", dest="lam", type=float, default=1.0)

    lock = sub.add_parser("locking", help="one convergence table per (algorithm, lambda)")
    _add_run_options(lock)
    lock.add_argument("--algorithms", type=parse_algorithms, default=list(ALGORITHMS))
    lock.add_argument("--lambdas", type=parse_floats, default=[1.0, 1e2, 1e4, 1e6, 1e8])

    sub.add_parser("selftest", help="run the invariant checks")
    return parser


def _fail(summary: dict) -> int:
    print(json.dumps({"status": "failed", **summary}), file=sys.stderr)
    return EXIT_FAILURE


def _write(reports, args) -> int:
    try:
        text = emit_table(reports, args.format, args.out)
    except OSError as exc:
        return _fail({"error": "unwritable destination", "path": args.out, "message": str(exc)})
    if args.out is None:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "selftest":
        results = run_selftest()
        for r in results:
            print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.value:.3e} (threshold {r.threshold:.1e})")
        failed = [r.to_dict() for r in results if not r.passed]
        if failed:
            return _fail({"command": "selftest", "failed": failed})
        return EXIT_OK

    options = dict(quad_rhs=args.quad_rhs, quad_err=args.quad_err, tol=args.tol)
    try:
        if args.command == "converge":
            reports = run_convergence(args.case, args.algorithm, args.mu, args.lam, args.levels, **options)
        else:
            reports = run_locking_sweep(args.case, args.algorithms, args.mu, args.lambdas, args.levels, **options)
    except SolverError as exc:
        report = exc.report
        return _fail({"command": args.command, "case": args.case, "error": "solver", "message": str(exc),
                      "residual": None if report is None else report.residual})
    except ValueError as exc:
        return _fail({"command": args.command, "case": args.case, "error": "invalid input", "message": str(exc)})
    return _write(reports, args)


if __name__ == "__main__":
    sys.exit(main())
