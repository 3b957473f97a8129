"""Command-line front end: analyze, transform, codegen, fetch.

Wires the pipeline together: parse a Matrix Market file, build the level
schedule, optionally rewrite thin levels, verify the rewritten system against
forward substitution, and emit a specialized source bundle. Identical inputs
and flags produce identical reports; the exit status is 0 only if every
requested stage, including verification, succeeded.
"""

from __future__ import annotations

import argparse
import os
import sys as _sys

from . import __version__
from .codegen import (
    DEFAULT_SPLIT_THRESHOLD,
    DEFAULT_STATEMENT_CAP,
    StatementCapError,
    emit_bundle,
    plan_codegen,
    write_bundle,
)
from .fetch import FetchError, cached_path, fetch_matrix
from .levels import build_dag, compute_levels, csr_flop_count, level_stats
from .matrix_io import (
    MatrixMarketError,
    SingularSystemError,
    load_lower_system,
    parse_matrix_market,
)
from .report import (
    codegen_summary,
    matrix_summary,
    render_text,
    schedule_summary,
    to_json,
    transform_summary,
    verification_summary,
)
from .rewrite import current_schedule, init_equations, rewrite_rows, rewrite_thin_levels
from .solve import verify_transform

_EXPECTED_ERRORS = (
    MatrixMarketError,
    SingularSystemError,
    FetchError,
    StatementCapError,
    FileNotFoundError,
    FileExistsError,
    IsADirectoryError,
    PermissionError,
    IndexError,
    ValueError,
)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _EXPECTED_ERRORS as err:
        print(f"error: {err}", file=_sys.stderr)
        return 2


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="sptrsvgen",
        description="Level-schedule analysis, equation rewriting and "
        "specialized code generation for sparse lower-triangular solves.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="parse a matrix and report its level structure")
    _common_matrix_flags(analyze)
    analyze.set_defaults(func=cmd_analyze)

    transform = sub.add_parser(
        "transform", help="rewrite thin levels and verify the transformed system"
    )
    _common_matrix_flags(transform)
    _transform_flags(transform)
    transform.set_defaults(func=cmd_transform)

    codegen = sub.add_parser(
        "codegen", help="transform (optionally), verify, and emit a source bundle"
    )
    _common_matrix_flags(codegen)
    _transform_flags(codegen)
    codegen.add_argument("--out", required=True, help="output directory for the bundle")
    codegen.add_argument(
        "--split-threshold",
        type=int,
        default=DEFAULT_SPLIT_THRESHOLD,
        help="max rows per generated function (default %(default)s)",
    )
    codegen.add_argument(
        "--embed-rhs",
        action="store_true",
        help="fold b (all ones) into per-row constants; the binary solves that b only",
    )
    codegen.add_argument(
        "--parallel", action="store_true", help="emit an OpenMP task-parallel driver"
    )
    codegen.add_argument(
        "--statement-cap",
        type=int,
        default=DEFAULT_STATEMENT_CAP,
        help="refuse to emit more than this many statements (default %(default)s)",
    )
    codegen.add_argument(
        "--force", action="store_true", help="overwrite existing bundle files in --out"
    )
    codegen.set_defaults(func=cmd_codegen)

    fetch = sub.add_parser("fetch", help="download a SuiteSparse matrix into the cache")
    fetch.add_argument("name", help="matrix name, e.g. lung2 or Norris/lung2")
    fetch.add_argument("--cache-dir", default=None, help="cache directory override")
    fetch.add_argument("--report", choices=("text", "structured"), default="text")
    fetch.set_defaults(func=cmd_fetch)
    return parser


def _common_matrix_flags(p):
    p.add_argument("--matrix", required=True, help="path to a Matrix Market file")
    p.add_argument(
        "--unit-diagonal",
        action="store_true",
        help="force every diagonal entry to 1.0 (for matrices missing diagonals)",
    )
    p.add_argument("--report", choices=("text", "structured"), default="text")


def _transform_flags(p):
    p.add_argument(
        "--thin-threshold",
        type=int,
        default=2,
        metavar="TAU",
        help="levels with at most TAU rows are rewritten away (default %(default)s)",
    )
    p.add_argument(
        "--fill-budget",
        type=int,
        default=256,
        help="max terms a rewritten equation may hold (default %(default)s)",
    )
    p.add_argument(
        "--min-levels-kept",
        type=int,
        default=1,
        help="stop eliminating once this many levels would remain (default %(default)s)",
    )
    p.add_argument(
        "--rows",
        default=None,
        help="comma-separated row list to elevate instead of the thin-level scan",
    )
    p.add_argument("--no-rewrite", action="store_true", help="skip rewriting entirely")
    p.add_argument("--seed", type=int, default=0, help="verification RNG seed")
    p.add_argument("--trials", type=int, default=10, help="verification trials (default 10)")
    p.add_argument("--tol", type=float, default=1e-10, help="verification tolerance")


def _load(args):
    system = load_lower_system(args.matrix, unit_diagonal=args.unit_diagonal)
    schedule = compute_levels(build_dag(system))
    equations = init_equations(system)
    return system, schedule, equations


def _emit(args, report):
    out = to_json(report) if args.report == "structured" else render_text(report)
    _sys.stdout.write(out)


def cmd_analyze(args) -> int:
    system, schedule, equations = _load(args)
    stats = level_stats(schedule, equations)
    report = {
        "command": "analyze",
        "version": __version__,
        "matrix": matrix_summary(args.matrix, system),
        "levels": schedule_summary(schedule, stats, classic_csr_flops=csr_flop_count(system)),
        "config": {"unit_diagonal": args.unit_diagonal},
    }
    _emit(args, report)
    return 0


def _run_transform(args, system, schedule, equations):
    if args.no_rewrite:
        return None
    if args.rows:
        rows = [int(tok) for tok in args.rows.split(",") if tok.strip()]
        return rewrite_rows(
            equations, schedule, rows, args.thin_threshold, args.fill_budget
        )
    return rewrite_thin_levels(
        equations,
        schedule,
        args.thin_threshold,
        args.fill_budget,
        min_levels_kept=args.min_levels_kept,
    )


def _transform_config(args):
    return {
        "thin_threshold": args.thin_threshold,
        "fill_budget": args.fill_budget,
        "min_levels_kept": args.min_levels_kept,
        "rows": args.rows,
        "no_rewrite": args.no_rewrite,
        "seed": args.seed,
        "trials": args.trials,
        "tol": args.tol,
        "unit_diagonal": args.unit_diagonal,
    }


def cmd_transform(args) -> int:
    system, schedule, equations = _load(args)
    stats_before = level_stats(schedule, equations)
    treport = _run_transform(args, system, schedule, equations)
    ver = verify_transform(
        system, equations, trials=args.trials, tol=args.tol, seed=args.seed
    )
    after = current_schedule(equations)
    report = {
        "command": "transform",
        "version": __version__,
        "matrix": matrix_summary(args.matrix, system),
        "levels": schedule_summary(schedule, stats_before, classic_csr_flops=csr_flop_count(system)),
        "levels_after": schedule_summary(after, level_stats(after, equations)),
        "transform": transform_summary(treport) if treport else None,
        "verification": verification_summary(ver),
        "config": _transform_config(args),
    }
    _emit(args, report)
    return 0 if ver.passed else 1


def cmd_codegen(args) -> int:
    system, schedule, equations = _load(args)
    stats_before = level_stats(schedule, equations)
    treport = _run_transform(args, system, schedule, equations)
    ver = verify_transform(
        system, equations, trials=args.trials, tol=args.tol, seed=args.seed
    )
    report = {
        "command": "codegen",
        "version": __version__,
        "matrix": matrix_summary(args.matrix, system),
        "levels": schedule_summary(schedule, stats_before, classic_csr_flops=csr_flop_count(system)),
        "transform": transform_summary(treport) if treport else None,
        "verification": verification_summary(ver),
        "config": {
            **_transform_config(args),
            "split_threshold": args.split_threshold,
            "embed_rhs": args.embed_rhs,
            "parallel": args.parallel,
            "out": args.out,
        },
    }
    if not ver.passed:
        report["codegen"] = {"refused": "verification failed"}
        _emit(args, report)
        return 1

    after = current_schedule(equations)
    report["levels_after"] = schedule_summary(after, level_stats(after, equations))
    rhs = None
    if args.embed_rhs:
        import numpy as np

        rhs = np.ones(system.n)
    plan = plan_codegen(
        after,
        equations,
        split_threshold=args.split_threshold,
        embed_rhs=args.embed_rhs,
        parallel=args.parallel,
        rhs=rhs,
        statement_cap=args.statement_cap,
    )
    bundle = emit_bundle(plan, equations, system)
    files = write_bundle(bundle, args.out, overwrite=args.force)
    report["codegen"] = codegen_summary(plan, files)
    _emit(args, report)
    return 0


def cmd_fetch(args) -> int:
    target = cached_path(args.name, args.cache_dir)
    was_cached = os.path.exists(target)
    path = fetch_matrix(args.name, cache_dir=args.cache_dir)
    n, entries, _ = parse_matrix_market(path)
    report = {
        "command": "fetch",
        "version": __version__,
        "fetch": {
            "name": args.name,
            "path": path,
            "cached": was_cached,
            "n": n,
            "entries": len(entries),
        },
        "config": {"cache_dir": args.cache_dir},
    }
    _emit(args, report)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
