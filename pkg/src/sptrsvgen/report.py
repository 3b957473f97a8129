"""Structured run reports: one document carrying the pipeline's numbers.

Reports are plain dicts (JSON-ready) with a text renderer, so a run can be
consumed by humans and tooling alike. Levels and FLOPs before/after rewriting
appear side by side, which is enough to reproduce the usual
barrier-reduction/FLOP-growth comparison from a single command.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .levels import THIN_REPORT_THRESHOLDS


def matrix_summary(path, system):
    m = system.matrix
    h = hashlib.sha256()
    h.update(np.int64(m.n).tobytes())
    h.update(m.row_ptr.tobytes())
    h.update(m.col_idx.tobytes())
    h.update(m.values.tobytes())
    return {
        "path": str(path),
        "n": m.n,
        "nnz": m.nnz,
        "hash": h.hexdigest()[:16],
    }


def schedule_summary(schedule, stats, classic_csr_flops=None):
    widths = stats.rows_per_level
    nl = int(stats.num_levels)
    out = {
        "num_levels": nl,
        "num_barriers": schedule.num_barriers,
        "rows": int(widths.sum()) if nl else 0,
        "mean_rows_per_level": stats.mean_rows_per_level,
        "median_rows_per_level": stats.median_rows_per_level,
        "max_rows_per_level": int(widths.max()) if nl else 0,
        "width_histogram": _width_histogram(widths),
        "thin_levels": {
            str(t): {
                "count": stats.thin_level_counts[t],
                "fraction": stats.thin_level_counts[t] / nl if nl else 0.0,
            }
            for t in THIN_REPORT_THRESHOLDS
        },
        "levels_with_exactly_2_rows": int((widths == 2).sum()) if nl else 0,
        "total_flops": stats.total_flops,
        "total_mem_specialized": stats.total_mem_specialized,
        "total_mem_generic_csr": stats.total_mem_generic,
    }
    if classic_csr_flops is not None:
        out["classic_csr_flops"] = int(classic_csr_flops)
    return out


def transform_summary(report):
    return {
        "levels_before": report.levels_before,
        "levels_after": report.levels_after,
        "flops_before": report.flops_before,
        "flops_after": report.flops_after,
        "flop_growth": report.flops_after / report.flops_before if report.flops_before else 0.0,
        "barrier_reduction": report.barrier_reduction,
        "rows_rewritten": report.rows_rewritten,
        "substitutions_performed": report.substitutions_performed,
        "rows_budget_exceeded": report.rows_budget_exceeded,
        "max_terms_in_any_equation": report.max_terms_in_any_equation,
        "max_abs_coefficient": report.max_abs_coefficient,
    }


def verification_summary(report):
    return {
        "passed": report.passed,
        "worst_error": report.worst_error,
        "worst_row": report.worst_row,
        "worst_trial": report.worst_trial,
        "trials": report.trials,
        "tol": report.tol,
        "nonfinite": report.nonfinite,
    }


def codegen_summary(plan, files):
    return {
        "functions": plan.num_functions,
        "files": list(files),
        "split_threshold": plan.split_threshold,
        "embed_rhs": plan.embed_rhs,
        "parallel": plan.parallel,
        "statements": plan.n,
    }


def render_text(report):
    """Human-readable rendering of a run report dict."""
    lines = []
    add = lines.append
    add(f"sptrsvgen {report.get('version', '')} — {report.get('command', '')}")
    mat = report.get("matrix")
    if mat:
        add(f"matrix: {mat['path']}")
        add(f"  n = {mat['n']}   nnz = {mat['nnz']}   hash = {mat['hash']}")
    for key, title in (("levels", "level schedule"), ("levels_after", "level schedule after rewriting")):
        sched = report.get(key)
        if not sched:
            continue
        add(f"{title}:")
        add(
            f"  levels = {sched['num_levels']}   barriers = {sched['num_barriers']}   "
            f"rows/level: mean {sched['mean_rows_per_level']:.2f}, "
            f"median {sched['median_rows_per_level']:.0f}, max {sched['max_rows_per_level']}"
        )
        thin = "   ".join(
            f"<={t}: {v['count']} ({100 * v['fraction']:.1f}%)"
            for t, v in sched["thin_levels"].items()
        )
        add(f"  thin levels {thin}")
        add(f"  width histogram: {_fmt_histogram(sched['width_histogram'])}")
        flops = f"  flops = {sched['total_flops']}"
        if "classic_csr_flops" in sched:
            flops += f" (classic CSR convention: {sched['classic_csr_flops']})"
        add(flops)
        add(
            f"  memory accesses: specialized = {sched['total_mem_specialized']}, "
            f"generic CSR = {sched['total_mem_generic_csr']}"
        )
    tr = report.get("transform")
    if tr:
        add("rewriting:")
        add(
            f"  levels {tr['levels_before']} -> {tr['levels_after']} "
            f"(barrier reduction {100 * tr['barrier_reduction']:.1f}%)"
        )
        add(
            f"  flops {tr['flops_before']} -> {tr['flops_after']} "
            f"(x{tr['flop_growth']:.4f})"
        )
        add(
            f"  rows rewritten = {tr['rows_rewritten']}   substitutions = "
            f"{tr['substitutions_performed']}   budget-blocked rows = {tr['rows_budget_exceeded']}"
        )
        add(
            f"  max terms in an equation = {tr['max_terms_in_any_equation']}   "
            f"max |coefficient| = {tr['max_abs_coefficient']:.3e}"
        )
    ver = report.get("verification")
    if ver:
        status = "PASS" if ver["passed"] else "FAIL"
        add(
            f"verification: {status}   worst error = {ver['worst_error']:.3e} "
            f"(row {ver['worst_row']}, trial {ver['worst_trial']}) over {ver['trials']} trials, "
            f"tol = {ver['tol']:g}"
        )
    cg = report.get("codegen")
    if cg:
        add("codegen:")
        add(
            f"  functions = {cg['functions']}   statements = {cg['statements']}   "
            f"split threshold = {cg['split_threshold']}   "
            f"mode = {'embed-rhs' if cg['embed_rhs'] else 'runtime-b'}, "
            f"{'parallel' if cg['parallel'] else 'serial'}"
        )
        add(f"  files: {', '.join(cg['files'])}")
    fetched = report.get("fetch")
    if fetched:
        add(f"fetched: {fetched['path']} ({'cache hit' if fetched['cached'] else 'downloaded'})")
    cfg = report.get("config")
    if cfg:
        add("config: " + ", ".join(f"{k}={v}" for k, v in sorted(cfg.items())))
    return "\n".join(lines) + "\n"


def to_json(report):
    return json.dumps(report, indent=2, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _width_histogram(widths):
    """Level widths bucketed by powers of two: 1, 2, 3-4, 5-8, ..."""
    hist = {}
    if not len(widths):
        return hist
    lo = 1
    hi = 1
    while lo <= int(widths.max()):
        count = int(((widths >= lo) & (widths <= hi)).sum())
        if count:
            label = str(lo) if lo == hi else f"{lo}-{hi}"
            hist[label] = count
        lo = hi + 1
        hi *= 2
    return hist


def _fmt_histogram(hist):
    return "  ".join(f"[{label}]x{count}" for label, count in hist.items()) or "(empty)"
