"""Command line entry point: one solver case or a full reference table."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .assembly import PRESSURE_KINDS
from .experiments import FORMATS, CaseConfig, format_cases, format_table, run_case, run_table

THREADS_ENV = "STOKESDD_THREADS"


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise SystemExit(f"{THREADS_ENV} must be an integer, got {raw!r}")
    return max(n, 1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="stokesdd",
        description="Dual-primal domain decomposition for 2-D Stokes on the unit square.",
    )
    ap.add_argument("--nsub", type=int, default=4, help="subdomains per side (default 4)")
    ap.add_argument("--ratio", type=int, default=8, help="H/h in velocity-mesh cells, even and >= 4 (default 8)")
    ap.add_argument("--coarse", choices=["corners", "corners-edges"], default="corners")
    ap.add_argument("--pressure", choices=list(PRESSURE_KINDS), default="continuous")
    ap.add_argument("--tol", type=float, default=1e-6, help="relative residual reduction (default 1e-6)")
    ap.add_argument("--maxit", type=int, default=500)
    ap.add_argument("--table", type=int, choices=[1, 2, 3, 4], help="run all rows of a reference table")
    ap.add_argument("--format", choices=list(FORMATS), default="md")
    ap.add_argument("--threads", type=int, default=None, help=f"subdomain solve threads (default ${THREADS_ENV} or 1)")
    ap.add_argument("--dump-matrices", metavar="DIR", help="write A, B, Z, meshes, partition stats (and G, M^-1 if small)")
    ap.add_argument("--residual-log", metavar="FILE", help="CSV of residual and Ritz estimates per iteration")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    threads = args.threads if args.threads is not None else default_threads()
    if threads < 1:
        print("--threads must be positive", file=sys.stderr)
        return 2

    if args.table is not None:
        result = run_table(args.table, tol=args.tol, maxit=args.maxit, threads=threads)
        sys.stdout.write(format_table(result, args.format))
        return result.exit_code

    try:
        config = CaseConfig(
            nsub=args.nsub, ratio=args.ratio, coarse=args.coarse, pressure=args.pressure,
            tol=args.tol, maxit=args.maxit, threads=threads,
        )
    except ValueError as exc:
        print(f"invalid case: {exc}", file=sys.stderr)
        return 2
    report = run_case(config, dump_matrices=args.dump_matrices, residual_log=args.residual_log)
    sys.stdout.write(format_cases([report], args.format))
    return 0 if report.converged else 1


if __name__ == "__main__":
    sys.exit(main())
