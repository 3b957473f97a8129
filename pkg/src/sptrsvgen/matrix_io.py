"""Matrix Market parsing and CSR construction for lower-triangular systems.

Input matrices come as Matrix Market coordinate files (the format SuiteSparse
ships). They are converted to a validated CSR structure and reduced to the
lower triangle (including the diagonal), which is what the solver pipeline
operates on.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


class MatrixMarketError(ValueError):
    """Malformed or unsupported Matrix Market input. Carries the offending line."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class SingularSystemError(ValueError):
    """A row has a missing or exactly-zero diagonal entry."""

    def __init__(self, row):
        super().__init__(f"row {row} has a missing or zero diagonal entry")
        self.row = row


class CooEntry(NamedTuple):
    row: int
    col: int
    value: float


@dataclass(eq=False)
class CsrMatrix:
    """Square sparse matrix in compressed sparse row form.

    Invariants (enforced at construction): row_ptr[0] == 0, row_ptr
    non-decreasing with row_ptr[n] == nnz, column indices strictly increasing
    within each row, and no stored value is exactly 0.0.
    """

    n: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.row_ptr = np.ascontiguousarray(self.row_ptr, dtype=np.int64)
        self.col_idx = np.ascontiguousarray(self.col_idx, dtype=np.int64)
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if len(self.row_ptr) != self.n + 1 or self.row_ptr[0] != 0:
            raise ValueError("row_ptr must have n+1 entries starting at 0")
        if self.row_ptr[-1] != len(self.col_idx) or len(self.col_idx) != len(self.values):
            raise ValueError("row_ptr[n] must equal nnz")
        if np.any(np.diff(self.row_ptr) < 0):
            raise ValueError("row_ptr must be non-decreasing")
        if self.nnz:
            if self.col_idx.min() < 0 or self.col_idx.max() >= self.n:
                raise ValueError("column index out of range")
            # strictly increasing within rows: diffs may only be <= 0 at row starts
            interior = np.ones(self.nnz, dtype=bool)
            interior[self.row_ptr[1:-1]] = False
            if np.any(np.diff(self.col_idx)[interior[1:]] <= 0):
                raise ValueError("column indices must be strictly increasing within a row")
            if np.any(self.values == 0.0):
                raise ValueError("explicitly stored zeros are not allowed")

    @property
    def nnz(self):
        return len(self.col_idx)

    def row_nnz(self, i):
        return int(self.row_ptr[i + 1] - self.row_ptr[i])

    def to_coo(self):
        """Re-emit the stored entries as CooEntry triples (row-major order)."""
        rows = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.row_ptr))
        return [
            CooEntry(int(r), int(c), float(v))
            for r, c, v in zip(rows, self.col_idx, self.values)
        ]

    def to_dense(self):
        dense = np.zeros((self.n, self.n))
        rows = np.repeat(np.arange(self.n), np.diff(self.row_ptr))
        dense[rows, self.col_idx] = self.values
        return dense


@dataclass(eq=False)
class LowerTriangularSystem:
    """A lower-triangular CSR matrix plus its diagonal extracted for O(1) access.

    Every stored entry satisfies col <= row, every diagonal entry is nonzero,
    and the last stored entry of each row is the diagonal.
    """

    matrix: CsrMatrix
    diag: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.diag = np.ascontiguousarray(self.diag, dtype=np.float64)
        if len(self.diag) != self.matrix.n:
            raise ValueError("diag length must equal n")

    @property
    def n(self):
        return self.matrix.n

    @property
    def nnz(self):
        return self.matrix.nnz


_SUPPORTED_FIELDS = ("real", "integer", "pattern")
_SUPPORTED_SYMMETRIES = ("general", "symmetric")


def parse_matrix_market(source):
    """Parse a Matrix Market coordinate file into 0-based COO entries.

    `source` may be a path, bytes, str, or a file-like object. Only square
    coordinate matrices with real/integer/pattern fields and general/symmetric
    symmetry are accepted. Symmetric inputs are expanded to both (i,j) and
    (j,i) for off-diagonal entries, pattern entries get value 1.0, and
    duplicate coordinates are summed.

    Returns (n, entries, symmetry) with entries a list of CooEntry.
    """
    text = _read_text(source)
    lines = text.splitlines()
    if not lines:
        raise MatrixMarketError("empty input", line_no=1)

    header = lines[0].split()
    if len(header) != 5 or header[0] != "%%MatrixMarket" or header[1].lower() != "matrix":
        raise MatrixMarketError(f"malformed header {lines[0]!r}", line_no=1)
    fmt, fld, sym = (tok.lower() for tok in header[2:5])
    if fmt != "coordinate":
        raise MatrixMarketError(f"unsupported format {fmt!r} (only coordinate)", line_no=1)
    if fld == "complex":
        raise MatrixMarketError("complex field is unsupported", line_no=1)
    if fld not in _SUPPORTED_FIELDS:
        raise MatrixMarketError(f"unsupported field {fld!r}", line_no=1)
    if sym not in _SUPPORTED_SYMMETRIES:
        raise MatrixMarketError(f"unsupported symmetry {sym!r}", line_no=1)

    # size line = first non-comment, non-blank line after the header
    size_idx = None
    for idx in range(1, len(lines)):
        stripped = lines[idx].strip()
        if stripped and not stripped.startswith("%"):
            size_idx = idx
            break
    if size_idx is None:
        raise MatrixMarketError("missing size line", line_no=len(lines))
    size_tok = lines[size_idx].split()
    if len(size_tok) != 3:
        raise MatrixMarketError(f"malformed size line {lines[size_idx]!r}", line_no=size_idx + 1)
    try:
        rows, cols, declared_nnz = (int(t) for t in size_tok)
    except ValueError:
        raise MatrixMarketError(f"malformed size line {lines[size_idx]!r}", line_no=size_idx + 1)
    if rows != cols:
        raise MatrixMarketError(f"matrix is {rows}x{cols}, not square", line_no=size_idx + 1)
    n = rows

    tokens_per_entry = 2 if fld == "pattern" else 3
    data_lines = [
        ln for ln in lines[size_idx + 1 :] if ln.strip() and not ln.lstrip().startswith("%")
    ]
    if len(data_lines) != declared_nnz:
        raise MatrixMarketError(
            f"declared {declared_nnz} entries but found {len(data_lines)}",
            line_no=size_idx + 1,
        )
    try:
        flat = np.array(" ".join(data_lines).split(), dtype=np.float64)
    except ValueError:
        raise MatrixMarketError("non-numeric entry data", line_no=size_idx + 2)
    if flat.size != declared_nnz * tokens_per_entry:
        raise MatrixMarketError(
            f"expected {tokens_per_entry} tokens per entry", line_no=size_idx + 2
        )
    flat = flat.reshape(-1, tokens_per_entry)

    rows_a = flat[:, 0].astype(np.int64) - 1  # file is 1-based
    cols_a = flat[:, 1].astype(np.int64) - 1
    vals_a = flat[:, 2].copy() if tokens_per_entry == 3 else np.ones(len(flat))
    if len(rows_a) and (
        rows_a.min() < 0 or cols_a.min() < 0 or rows_a.max() >= n or cols_a.max() >= n
    ):
        raise MatrixMarketError("entry index out of range", line_no=size_idx + 2)

    if sym == "symmetric":
        off = rows_a != cols_a
        rows_a, cols_a = (
            np.concatenate([rows_a, cols_a[off]]),
            np.concatenate([cols_a, rows_a[off]]),
        )
        vals_a = np.concatenate([vals_a, vals_a[off]])

    rows_a, cols_a, vals_a = _sum_duplicates(n, rows_a, cols_a, vals_a, drop_zeros=False)
    entries = [
        CooEntry(r, c, v)
        for r, c, v in zip(rows_a.tolist(), cols_a.tolist(), vals_a.tolist())
    ]
    return n, entries, sym


def to_csr(n, entries):
    """Compress COO entries into a CsrMatrix.

    Duplicate coordinates are summed; entries whose summed value is exactly
    0.0 are dropped so that nnz reflects the dependency structure actually
    solved.
    """
    if isinstance(entries, np.ndarray) and entries.ndim == 2:
        rows = entries[:, 0].astype(np.int64)
        cols = entries[:, 1].astype(np.int64)
        vals = entries[:, 2].astype(np.float64)
    elif entries:
        rows, cols, vals = (np.asarray(a) for a in zip(*entries))
        rows = rows.astype(np.int64)
        cols = cols.astype(np.int64)
        vals = vals.astype(np.float64)
    else:
        rows = cols = np.empty(0, dtype=np.int64)
        vals = np.empty(0)
    if len(rows) and (rows.min() < 0 or cols.min() < 0 or rows.max() >= n or cols.max() >= n):
        raise IndexError(f"entry index out of range for n={n}")

    rows, cols, vals = _sum_duplicates(n, rows, cols, vals, drop_zeros=True)
    row_ptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(row_ptr, rows + 1, 1)
    np.cumsum(row_ptr, out=row_ptr)
    return CsrMatrix(n=n, row_ptr=row_ptr, col_idx=cols, values=vals)


def extract_lower(csr, unit_diagonal=False):
    """Reduce a square CSR matrix to its lower triangle (diagonal included).

    General SuiteSparse matrices are benchmarked through their lower triangle;
    entries with col > row are discarded, all retained values are copied
    unchanged. With `unit_diagonal` every diagonal entry is forced to 1.0
    (inserting it if structurally absent); otherwise a missing or zero
    diagonal raises SingularSystemError.
    """
    rows = np.repeat(np.arange(csr.n, dtype=np.int64), np.diff(csr.row_ptr))
    keep = csr.col_idx <= rows
    rows = rows[keep]
    cols = csr.col_idx[keep]
    vals = csr.values[keep].copy()

    is_diag = rows == cols
    diag = np.zeros(csr.n)
    diag[rows[is_diag]] = vals[is_diag]
    has_diag = np.zeros(csr.n, dtype=bool)
    has_diag[rows[is_diag]] = True

    if unit_diagonal:
        vals[is_diag] = 1.0
        missing = np.flatnonzero(~has_diag)
        if len(missing):
            rows = np.concatenate([rows, missing])
            cols = np.concatenate([cols, missing])
            vals = np.concatenate([vals, np.ones(len(missing))])
        diag = np.ones(csr.n)
    else:
        bad = np.flatnonzero(~has_diag | (diag == 0.0))
        if len(bad):
            raise SingularSystemError(int(bad[0]))

    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    row_ptr = np.zeros(csr.n + 1, dtype=np.int64)
    np.add.at(row_ptr, rows + 1, 1)
    np.cumsum(row_ptr, out=row_ptr)
    lower = CsrMatrix(n=csr.n, row_ptr=row_ptr, col_idx=cols, values=vals)
    return LowerTriangularSystem(matrix=lower, diag=diag)


def load_lower_system(path, unit_diagonal=False):
    """Parse a Matrix Market file and extract its lower-triangular system."""
    n, entries, _ = parse_matrix_market(path)
    csr = to_csr(n, entries)
    return extract_lower(csr, unit_diagonal=unit_diagonal)


def _read_text(source):
    if isinstance(source, bytes):
        return source.decode("ascii", errors="replace")
    if isinstance(source, str):
        # a str is raw content if it looks like one, else a path
        if "\n" in source or source.startswith("%%MatrixMarket"):
            return source
        source = os.fspath(source)
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            return fh.read().decode("ascii", errors="replace")
    if hasattr(source, "read"):
        data = source.read()
        return data.decode("ascii", errors="replace") if isinstance(data, bytes) else data
    raise TypeError(f"cannot read Matrix Market data from {type(source).__name__}")


def _sum_duplicates(n, rows, cols, vals, drop_zeros):
    """Coalesce repeated (row, col) coordinates, row-major sorted output."""
    if not len(rows):
        return rows, cols, vals
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    key = rows * n + cols
    first = np.ones(len(key), dtype=bool)
    first[1:] = key[1:] != key[:-1]
    starts = np.flatnonzero(first)
    summed = np.add.reduceat(vals, starts)
    rows, cols = rows[starts], cols[starts]
    if drop_zeros:
        nz = summed != 0.0
        rows, cols, summed = rows[nz], cols[nz], summed[nz]
    return rows, cols, summed
