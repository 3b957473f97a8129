"""Shared builders and independent oracles for the test suite."""

from __future__ import annotations

import numpy as np

from sptrsvgen import (
    CsrMatrix,
    LowerTriangularSystem,
    extract_lower,
    to_csr,
)

# Four-row system used throughout: r1 depends on r0, r2 on r1, r3 on r1 and r2,
# so the level schedule is a pure ladder [0], [1], [2], [3].
FIG2_ENTRIES = [
    (0, 0, 2.0),
    (1, 0, 3.0),
    (1, 1, 4.0),
    (2, 1, -1.0),
    (2, 2, 2.0),
    (3, 1, 5.0),
    (3, 2, -2.0),
    (3, 3, 8.0),
]


def fig2_system() -> LowerTriangularSystem:
    return extract_lower(to_csr(4, FIG2_ENTRIES))


def make_chain(n, diag=1.0, sub=-1.0) -> LowerTriangularSystem:
    """Bidiagonal chain: row i depends only on row i-1."""
    entries = [(0, 0, diag)]
    for i in range(1, n):
        entries.append((i, i - 1, sub))
        entries.append((i, i, diag))
    return extract_lower(to_csr(n, entries))


def make_identity(n) -> LowerTriangularSystem:
    return extract_lower(to_csr(n, [(i, i, 1.0) for i in range(n)]))


def make_random_lower(rng, n, density, diag_range=(0.5, 2.0)) -> LowerTriangularSystem:
    """Random lower-triangular system with the given strict-lower density."""
    rows = [np.arange(n, dtype=np.int64)]
    cols = [np.arange(n, dtype=np.int64)]
    lo, hi = diag_range
    vals = [rng.uniform(lo, hi, n)]
    for i in range(1, n):
        k = rng.binomial(i, min(density, 1.0))
        if not k:
            continue
        c = np.unique(rng.integers(0, i, size=k))
        rows.append(np.full(len(c), i, dtype=np.int64))
        cols.append(c)
        v = rng.uniform(-1.0, 1.0, len(c))
        v[v == 0.0] = 0.5
        vals.append(v)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    order = np.lexsort((cols, rows))
    row_ptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(row_ptr, rows + 1, 1)
    np.cumsum(row_ptr, out=row_ptr)
    csr = CsrMatrix(n=n, row_ptr=row_ptr, col_idx=cols[order], values=vals[order])
    return extract_lower(csr)


def dense_forward_substitution(a, b):
    """Textbook dense forward substitution; the small-scale solver oracle."""
    n = len(b)
    x = np.zeros(n)
    for i in range(n):
        acc = b[i]
        for j in range(i):
            acc -= a[i][j] * x[j]
        x[i] = acc / a[i][i]
    return x


def longest_dependency_path(system):
    """Independent longest-path length of the dependency DAG (networkx)."""
    import networkx as nx

    g = nx.DiGraph()
    g.add_nodes_from(range(system.n))
    m = system.matrix
    rows = np.repeat(np.arange(m.n), np.diff(m.row_ptr))
    for i, j in zip(rows.tolist(), m.col_idx.tolist()):
        if i != j:
            g.add_edge(j, i)
    return nx.dag_longest_path_length(g)


def brute_force_adjacency(system):
    """Dependency sets recovered by scanning the dense matrix, row by row."""
    dense = system.matrix.to_dense()
    n = system.n
    deps = [sorted(j for j in range(i) if dense[i, j] != 0.0) for i in range(n)]
    dependents = [sorted(i for i in range(j + 1, n) if dense[i, j] != 0.0) for j in range(n)]
    return deps, dependents


def write_mm(path, n, entries, symmetry="general", field="real"):
    """Write a Matrix Market coordinate file (1-based) for CLI/parser tests."""
    with open(path, "w") as fh:
        fh.write(f"%%MatrixMarket matrix coordinate {field} {symmetry}\n")
        fh.write(f"% test matrix\n{n} {n} {len(entries)}\n")
        for r, c, v in entries:
            if field == "pattern":
                fh.write(f"{r + 1} {c + 1}\n")
            else:
                fh.write(f"{r + 1} {c + 1} {v!r}\n")
    return path
