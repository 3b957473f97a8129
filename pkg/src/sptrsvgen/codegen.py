"""Matrix-specialized solver source generation.

Each level of the schedule becomes one or more C functions of straight-line
statements, one per row, with every coefficient and index embedded as a
literal constant: value loads and indirect indexing disappear from the kernel.
In the default mode the right-hand side is still read from a b array at run
time through the folded coefficients, so the binary solves any b; with
embed_rhs the b-terms of each row are pre-folded into a single constant and
the code is valid for that one right-hand side only.

Emission is deterministic: identical inputs yield byte-identical bundles.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .levels import LevelSchedule

DEFAULT_SPLIT_THRESHOLD = 2048
DEFAULT_STATEMENT_CAP = 2_000_000
_FUNCS_PER_FILE = 64
_VALUES_PER_LINE = 8


class StatementCapError(RuntimeError):
    """Refuses to emit a source bundle larger than the configured cap."""


@dataclass(eq=False)
class FunctionSpec:
    """One generated kernel function: a contiguous chunk of one level's rows."""

    name: str
    level: int
    rows: np.ndarray


@dataclass(eq=False)
class CodegenPlan:
    """Function layout and embedding policy for one emission run."""

    split_threshold: int
    embed_rhs: bool
    parallel: bool
    functions: list
    n: int
    num_levels: int
    rhs: np.ndarray | None = None

    @property
    def num_functions(self):
        return len(self.functions)

    def functions_of_level(self, level):
        return [f for f in self.functions if f.level == level]


@dataclass(eq=False)
class SourceBundle:
    """Self-contained generated sources: kernels, driver, fallback, makefile."""

    kernels: list  # [(filename, text)]
    driver: str
    fallback: str
    makefile: str

    def files(self):
        out = dict(self.kernels)
        out["driver.c"] = self.driver
        out["fallback.c"] = self.fallback
        out["Makefile"] = self.makefile
        return out


def plan_codegen(
    schedule: LevelSchedule,
    sys,
    split_threshold=DEFAULT_SPLIT_THRESHOLD,
    embed_rhs=False,
    parallel=False,
    rhs=None,
    statement_cap=DEFAULT_STATEMENT_CAP,
) -> CodegenPlan:
    """Partition every level into row chunks of at most split_threshold rows.

    Thick levels yield multiple functions named level{L}_part{P}; a level at
    or under the threshold yields exactly one.
    """
    if split_threshold < 1:
        raise ValueError("split_threshold must be >= 1")
    if schedule.n != sys.n:
        raise ValueError(f"schedule covers {schedule.n} rows, system has {sys.n}")
    if sys.n > statement_cap:
        raise StatementCapError(
            f"{sys.n} statements exceed the cap of {statement_cap}; "
            "raise the cap explicitly to emit this matrix"
        )
    if embed_rhs:
        if rhs is None:
            raise ValueError("embed_rhs requires an rhs vector to fold in")
        rhs = np.ascontiguousarray(rhs, dtype=np.float64)
        if len(rhs) != sys.n:
            raise ValueError(f"rhs has length {len(rhs)}, expected {sys.n}")
    else:
        rhs = None

    functions = []
    for lv, rows in enumerate(schedule.levels):
        parts = math.ceil(len(rows) / split_threshold)
        for p in range(parts):
            chunk = rows[p * split_threshold : (p + 1) * split_threshold]
            functions.append(FunctionSpec(name=f"level{lv}_part{p}", level=lv, rows=chunk))
    return CodegenPlan(
        split_threshold=split_threshold,
        embed_rhs=embed_rhs,
        parallel=parallel,
        functions=functions,
        n=sys.n,
        num_levels=schedule.num_levels,
        rhs=rhs,
    )


def emit_kernels(plan: CodegenPlan, sys):
    """Render the kernel sources as a list of (filename, text) pairs.

    One statement per row: b-terms then x-terms, each sorted by index, every
    coefficient a shortest round-trip decimal literal of its 64-bit value.
    """
    sig = _kernel_signature(plan)
    chunks = []
    for start in range(0, len(plan.functions), _FUNCS_PER_FILE):
        group = plan.functions[start : start + _FUNCS_PER_FILE]
        text = ["/* Specialized solver kernels: one straight-line statement per row. */\n"]
        for fn in group:
            text.append(f"\nvoid {fn.name}({sig}) {{\n")
            for row in fn.rows.tolist():
                text.append(f"  {_row_statement(sys.equations[row], plan)}\n")
            text.append("}\n")
        chunks.append((f"kernels_{start // _FUNCS_PER_FILE:03d}.c", "".join(text)))
    return chunks


def emit_driver(plan: CodegenPlan) -> str:
    """Render the driver: level-ordered calls, timing, checksum, self-check.

    With parallel set, the functions of a level run as independent tasks and
    a taskwait separates consecutive levels (no barrier after the last one);
    without it the calls are plain and sequential.
    """
    sig = _kernel_signature(plan)
    call_args = "x" if plan.embed_rhs else "b, x"
    out = ["/* Driver for the specialized solver. */\n"]
    out.append("#include <stdio.h>\n#include <stdlib.h>\n#include <time.h>\n")
    out.append(f"\n#define N {plan.n}\n\n")
    for fn in plan.functions:
        out.append(f"void {fn.name}({sig});\n")
    out.append("void solve_csr_fallback(const double *b, double *x);\n\n")
    if plan.embed_rhs:
        out.append("static const double b[N] = {\n")
        out.append(_array_lines(_float_lit(v) for v in plan.rhs.tolist()))
        out.append("};\n")
    else:
        out.append("static double b[N];\n")
    out.append("static double x[N];\nstatic double x_ref[N];\n\n")

    out.append("static void solve_specialized(void) {\n")
    if plan.parallel:
        out.append("#pragma omp parallel\n#pragma omp single\n  {\n")
        for lv in range(plan.num_levels):
            if lv:
                out.append("#pragma omp taskwait\n")
            for fn in plan.functions_of_level(lv):
                out.append(f"#pragma omp task\n    {fn.name}({call_args});\n")
        out.append("  }\n")
    else:
        for fn in plan.functions:
            out.append(f"  {fn.name}({call_args});\n")
    out.append("}\n\n")

    if plan.embed_rhs:
        out.append("int main(void) {\n")
    else:
        out.append(
            "int main(int argc, char **argv) {\n"
            "  if (argc < 2) {\n"
            '    fprintf(stderr, "usage: %s <b-file with N little-endian doubles>\\n", argv[0]);\n'
            "    return 2;\n"
            "  }\n"
            '  FILE *fh = fopen(argv[1], "rb");\n'
            "  if (fh == NULL || fread(b, sizeof(double), N, fh) != (size_t)N) {\n"
            '    fprintf(stderr, "failed to read %d doubles from %s\\n", N, argv[1]);\n'
            "    return 2;\n"
            "  }\n"
            "  fclose(fh);\n"
        )
    out.append(
        "  struct timespec t0, t1;\n"
        "  clock_gettime(CLOCK_MONOTONIC, &t0);\n"
        "  solve_specialized();\n"
        "  clock_gettime(CLOCK_MONOTONIC, &t1);\n"
        "  double ms = (t1.tv_sec - t0.tv_sec) * 1e3 + (t1.tv_nsec - t0.tv_nsec) / 1e6;\n"
        "  solve_csr_fallback(b, x_ref);\n"
        "  double sum = 0.0;\n"
        "  double diff = 0.0;\n"
        "  for (int i = 0; i < N; i++) {\n"
        "    double d = x[i] - x_ref[i];\n"
        "    if (d < 0.0) d = -d;\n"
        "    if (d > diff) diff = d;\n"
        "    sum += x[i];\n"
        "  }\n"
        '  printf("checksum=%.17g\\n", sum);\n'
        '  printf("time_ms=%.6f\\n", ms);\n'
        '  printf("fallback_max_abs_diff=%.3e\\n", diff);\n'
        "  return 0;\n"
        "}\n"
    )
    return "".join(out)


def emit_fallback(system) -> str:
    """Generic CSR forward substitution with the matrix baked in as data."""
    m = system.matrix
    out = ["/* Generic CSR solver used to self-check the specialized kernels. */\n\n"]
    out.append(f"#define N {m.n}\n#define NNZ {m.nnz}\n\n")
    out.append("static const int row_ptr[N + 1] = {\n")
    out.append(_array_lines(str(v) for v in m.row_ptr.tolist()))
    out.append("};\nstatic const int col_idx[NNZ] = {\n")
    out.append(_array_lines(str(v) for v in m.col_idx.tolist()))
    out.append("};\nstatic const double values[NNZ] = {\n")
    out.append(_array_lines(_float_lit(v) for v in m.values.tolist()))
    out.append(
        "};\n\n"
        "void solve_csr_fallback(const double *b, double *x) {\n"
        "  for (int i = 0; i < N; i++) {\n"
        "    double acc = b[i];\n"
        "    int end = row_ptr[i + 1] - 1;\n"
        "    for (int k = row_ptr[i]; k < end; k++)\n"
        "      acc -= values[k] * x[col_idx[k]];\n"
        "    x[i] = acc / values[end];\n"
        "  }\n"
        "}\n"
    )
    return "".join(out)


def emit_makefile(plan: CodegenPlan, kernel_files) -> str:
    srcs = " ".join(["driver.c", "fallback.c"] + [name for name, _ in kernel_files])
    omp = "-fopenmp" if plan.parallel else ""
    return (
        "CC ?= cc\n"
        "CFLAGS ?= -O2\n"
        f"OMPFLAGS = {omp}\n"
        f"SRCS = {srcs}\n"
        "BIN = sptrsv_specialized\n"
        "\n"
        "all: $(BIN)\n"
        "\n"
        "$(BIN): $(SRCS)\n"
        "\t$(CC) $(CFLAGS) $(OMPFLAGS) -o $@ $(SRCS) -lm\n"
        "\n"
        "clean:\n"
        "\trm -f $(BIN)\n"
        "\n"
        ".PHONY: all clean\n"
    )


def emit_bundle(plan: CodegenPlan, sys, system) -> SourceBundle:
    """Emit the full self-contained bundle for one system."""
    kernels = emit_kernels(plan, sys)
    return SourceBundle(
        kernels=kernels,
        driver=emit_driver(plan),
        fallback=emit_fallback(system),
        makefile=emit_makefile(plan, kernels),
    )


def write_bundle(bundle: SourceBundle, out_dir, overwrite=False):
    """Write the bundle under out_dir; refuses to clobber unless overwrite."""
    os.makedirs(out_dir, exist_ok=True)
    files = bundle.files()
    if not overwrite:
        for name in files:
            path = os.path.join(out_dir, name)
            if os.path.exists(path):
                raise FileExistsError(f"{path} exists; pass overwrite to replace it")
    for name, text in files.items():
        with open(os.path.join(out_dir, name), "w") as fh:
            fh.write(text)
    return sorted(files)


def _kernel_signature(plan):
    return "double *x" if plan.embed_rhs else "const double *b, double *x"


def _row_statement(eq, plan):
    terms = []
    if plan.embed_rhs:
        folded = 0.0
        for k in sorted(eq.b_terms):
            folded += eq.b_terms[k] * plan.rhs[k]
        terms.append(_float_lit(folded))
    else:
        terms.extend(f"{_float_lit(eq.b_terms[k])}*b[{k}]" for k in sorted(eq.b_terms))
    terms.extend(f"{_float_lit(eq.x_terms[m])}*x[{m}]" for m in sorted(eq.x_terms))
    return f"x[{eq.row}] = " + " + ".join(terms) + ";"


def _float_lit(v):
    v = float(v)
    if not math.isfinite(v):
        raise ValueError(f"cannot emit non-finite coefficient {v!r}")
    return repr(v)


def _array_lines(tokens):
    toks = list(tokens)
    lines = []
    for start in range(0, len(toks), _VALUES_PER_LINE):
        lines.append("  " + ", ".join(toks[start : start + _VALUES_PER_LINE]) + ",\n")
    return "".join(lines)
