"""Row-dependency DAG construction and level-set (wavefront) scheduling.

A lower-triangular system induces a DAG with one node per row and an edge
j -> i for every stored off-diagonal entry (i, j). Rows grouped by longest
dependency depth form levels: all rows of a level are mutually independent
and may run in parallel, with a synchronization barrier between levels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit


@dataclass(eq=False)
class DependencyDag:
    """Forward (deps) and reverse (dependents) adjacency in packed CSR form.

    deps(i) lists the rows j < i that row i reads; every edge goes from a
    lower to a strictly higher row index, so the graph is acyclic by
    construction.
    """

    n: int
    dep_ptr: np.ndarray
    dep_idx: np.ndarray
    use_ptr: np.ndarray = field(repr=False)
    use_idx: np.ndarray = field(repr=False)

    def deps(self, i):
        return self.dep_idx[self.dep_ptr[i] : self.dep_ptr[i + 1]]

    def dependents(self, i):
        return self.use_idx[self.use_ptr[i] : self.use_ptr[i + 1]]

    @property
    def num_edges(self):
        return len(self.dep_idx)


@dataclass(eq=False)
class LevelSchedule:
    """Partition of rows into dependency levels.

    level_of[i] == 0 iff row i has no dependencies, otherwise one more than
    the deepest dependency. The concatenation of `levels` is a permutation of
    all rows; each level is sorted ascending and none is empty.
    """

    level_of: np.ndarray
    levels: list
    num_levels: int

    @property
    def n(self):
        return len(self.level_of)

    def width(self, level):
        return len(self.levels[level])

    @property
    def num_barriers(self):
        # no barrier is needed after the last level
        return max(self.num_levels - 1, 0)


@dataclass(eq=False)
class LevelStats:
    """Per-level and aggregate operation counts for an equation system.

    FLOPs follow the normalized-equation convention: a row with p right-hand
    side terms and q solution terms costs 2*(p+q) - 1 (p+q multiplies,
    p+q-1 adds; the diagonal division is folded into the coefficients).
    Memory accesses are reported under two conventions: specialized code with
    embedded constants (p + q reads + 1 write) and generic CSR execution
    (2q+2 index/value reads + q x reads + 1 b read + 1 write).
    """

    rows_per_level: np.ndarray
    terms_per_level: np.ndarray
    flops_per_level: np.ndarray
    mem_specialized_per_level: np.ndarray
    mem_generic_per_level: np.ndarray
    total_flops: int
    total_mem_specialized: int
    total_mem_generic: int
    mean_rows_per_level: float
    median_rows_per_level: float
    thin_level_counts: dict

    @property
    def num_levels(self):
        return len(self.rows_per_level)


THIN_REPORT_THRESHOLDS = (1, 2, 4, 8)


def build_dag(system) -> DependencyDag:
    """Build the row-dependency DAG of a LowerTriangularSystem.

    deps(i) is exactly the off-diagonal column set of row i; diagonal entries
    produce no edges.
    """
    m = system.matrix
    rows = np.repeat(np.arange(m.n, dtype=np.int64), np.diff(m.row_ptr))
    off = m.col_idx != rows
    return _pack_dag(m.n, rows[off], m.col_idx[off])


def dag_from_equations(sys) -> DependencyDag:
    """Build the DAG induced by the x-terms of a (possibly rewritten) system."""
    counts = np.fromiter(
        (len(eq.x_terms) for eq in sys.equations), dtype=np.int64, count=sys.n
    )
    rows = np.repeat(np.arange(sys.n, dtype=np.int64), counts)
    cols = np.empty(int(counts.sum()), dtype=np.int64)
    pos = 0
    for eq in sys.equations:
        q = len(eq.x_terms)
        if q:
            cols[pos : pos + q] = sorted(eq.x_terms)
            pos += q
    return _pack_dag(sys.n, rows, cols)


def _pack_dag(n, edge_rows, edge_cols):
    # edge_rows are already sorted (row-major input); deps per row stay sorted
    dep_ptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(dep_ptr, edge_rows + 1, 1)
    np.cumsum(dep_ptr, out=dep_ptr)
    dep_idx = edge_cols.copy()

    order = np.argsort(edge_cols, kind="stable")
    use_ptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(use_ptr, edge_cols + 1, 1)
    np.cumsum(use_ptr, out=use_ptr)
    use_idx = edge_rows[order]
    return DependencyDag(n=n, dep_ptr=dep_ptr, dep_idx=dep_idx, use_ptr=use_ptr, use_idx=use_idx)


@njit(cache=True)
def _levels_kernel(n, dep_ptr, dep_idx):
    level_of = np.zeros(n, dtype=np.int64)
    for i in range(n):
        lv = -1
        for k in range(dep_ptr[i], dep_ptr[i + 1]):
            dl = level_of[dep_idx[k]]
            if dl > lv:
                lv = dl
        level_of[i] = lv + 1
    return level_of


def compute_levels(dag: DependencyDag) -> LevelSchedule:
    """Assign each row its level in one ascending pass.

    Well-defined because every dependency has a smaller row index, so its
    level is already known when the dependent row is visited.
    """
    level_of = _levels_kernel(dag.n, dag.dep_ptr, dag.dep_idx)
    num_levels = int(level_of.max()) + 1 if dag.n else 0
    order = np.argsort(level_of, kind="stable")  # stable keeps rows ascending per level
    counts = np.bincount(level_of, minlength=num_levels)
    levels = list(np.split(order, np.cumsum(counts)[:-1]))
    return LevelSchedule(level_of=level_of, levels=levels, num_levels=num_levels)


def level_stats(schedule: LevelSchedule, sys) -> LevelStats:
    """Aggregate per-level row/term/FLOP/memory-access counts for a system."""
    if schedule.n != sys.n:
        raise ValueError(
            f"schedule covers {schedule.n} rows but system has {sys.n}"
        )
    p = np.fromiter((len(eq.b_terms) for eq in sys.equations), dtype=np.int64, count=sys.n)
    q = np.fromiter((len(eq.x_terms) for eq in sys.equations), dtype=np.int64, count=sys.n)
    terms = p + q
    flops = 2 * terms - 1
    mem_spec = terms + 1
    mem_gen = 3 * q + 4

    lv = schedule.level_of
    nl = schedule.num_levels
    rows_per = np.bincount(lv, minlength=nl)
    stats = LevelStats(
        rows_per_level=rows_per,
        terms_per_level=np.bincount(lv, weights=terms, minlength=nl).astype(np.int64),
        flops_per_level=np.bincount(lv, weights=flops, minlength=nl).astype(np.int64),
        mem_specialized_per_level=np.bincount(lv, weights=mem_spec, minlength=nl).astype(np.int64),
        mem_generic_per_level=np.bincount(lv, weights=mem_gen, minlength=nl).astype(np.int64),
        total_flops=int(flops.sum()),
        total_mem_specialized=int(mem_spec.sum()),
        total_mem_generic=int(mem_gen.sum()),
        mean_rows_per_level=float(rows_per.mean()) if nl else 0.0,
        median_rows_per_level=float(np.median(rows_per)) if nl else 0.0,
        thin_level_counts={t: int((rows_per <= t).sum()) for t in THIN_REPORT_THRESHOLDS},
    )
    return stats


def csr_flop_count(system) -> int:
    """Classic per-row 2k+1 FLOP count of generic CSR forward substitution."""
    offdiag = system.nnz - system.n
    return 2 * offdiag + system.n
