"""Dependency-graph rewriting and specialized code generation for SpTRSV.

The pipeline: parse a Matrix Market matrix, reduce it to its lower triangle,
schedule rows into dependency levels, rewrite the equations of thin levels so
their rows migrate to earlier levels (removing synchronization barriers), and
emit straight-line C solver code specialized to the matrix. Every rewrite is
verified against reference forward substitution.
"""

from .codegen import (
    CodegenPlan,
    FunctionSpec,
    SourceBundle,
    StatementCapError,
    emit_bundle,
    emit_driver,
    emit_kernels,
    plan_codegen,
    write_bundle,
)
from .fetch import FetchError, fetch_matrix
from .levels import (
    DependencyDag,
    LevelSchedule,
    LevelStats,
    build_dag,
    compute_levels,
    csr_flop_count,
    dag_from_equations,
    level_stats,
)
from .matrix_io import (
    CooEntry,
    CsrMatrix,
    LowerTriangularSystem,
    MatrixMarketError,
    SingularSystemError,
    extract_lower,
    load_lower_system,
    parse_matrix_market,
    to_csr,
)
from .rewrite import (
    ElevationResult,
    Equation,
    EquationSystem,
    NoSuchTermError,
    TransformReport,
    current_schedule,
    elevate_row,
    flop_count,
    init_equations,
    recompute_level,
    rewrite_rows,
    rewrite_thin_levels,
    substitute,
)
from .solve import (
    EquationEvaluator,
    ScheduleViolationError,
    SolveResult,
    VerificationReport,
    evaluate_equations,
    serial_sptrsv,
    verify_transform,
)

__version__ = "0.1.0"
