"""CSR sparse matrices and the vector operations built on them.

All arithmetic that reduces over matrix entries runs in a fixed order
(row-major, ascending column index) so that iteration counts and
residual histories are reproducible bit for bit across runs.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from lasersolve import _kernels

__all__ = [
    "SparseMatrix",
    "spmv",
    "transpose",
    "relative_residual",
    "random_rhs",
    "row_abs_sums",
]


def _as_index_array(a, name):
    arr = np.asarray(a, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    return arr


@dataclasses.dataclass(frozen=True, eq=False, repr=False)
class SparseMatrix:
    """Immutable CSR matrix over float64.

    Invariants enforced at construction:

    - ``row_starts`` has length ``nrows + 1``, starts at 0, is
      nondecreasing, and ends at ``nnz``;
    - within each row, column indices are strictly increasing (no
      duplicate coordinates) and lie in ``[0, ncols)``;
    - values are finite float64.

    Rectangular storage is allowed; solver entry points require a
    square matrix and check for it themselves.
    """

    nrows: int
    ncols: int
    row_starts: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.nrows < 0 or self.ncols < 0:
            raise ValueError("matrix dimensions must be nonnegative")
        row_starts = _as_index_array(self.row_starts, "row_starts")
        col_indices = _as_index_array(self.col_indices, "col_indices")
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError("values must be one-dimensional")
        if row_starts.shape[0] != self.nrows + 1:
            raise ValueError("row_starts must have length nrows + 1")
        if row_starts[0] != 0:
            raise ValueError("row_starts must begin at 0")
        if np.any(np.diff(row_starts) < 0):
            raise ValueError("row_starts must be nondecreasing")
        nnz = col_indices.shape[0]
        if values.shape[0] != nnz:
            raise ValueError("col_indices and values must have equal length")
        if row_starts[-1] != nnz:
            raise ValueError("row_starts must end at nnz")
        if nnz:
            if col_indices.min() < 0 or col_indices.max() >= self.ncols:
                raise ValueError("column index out of range")
            # Strict increase within rows; decreases are legal only at
            # row boundaries.  Boundaries at nnz belong to trailing
            # empty rows and mark no stored entry.
            new_row = np.zeros(nnz, dtype=bool)
            boundaries = row_starts[1:-1]
            new_row[boundaries[boundaries < nnz]] = True
            deltas = np.diff(col_indices)
            if np.any(deltas[~new_row[1:]] <= 0):
                raise ValueError(
                    "column indices must be strictly increasing within a row"
                )
        if not np.all(np.isfinite(values)):
            raise ValueError("matrix values must be finite")
        for name, arr in (
            ("row_starts", row_starts),
            ("col_indices", col_indices),
            ("values", values),
        ):
            arr = arr.copy() if not arr.flags.owndata else arr
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def nnz(self) -> int:
        return int(self.values.shape[0])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    @property
    def is_square(self) -> bool:
        return self.nrows == self.ncols

    def __repr__(self):
        return (
            f"SparseMatrix(nrows={self.nrows}, ncols={self.ncols}, "
            f"nnz={self.nnz})"
        )

    def row_of_entry(self) -> np.ndarray:
        """Row index of every stored entry, in storage order."""
        counts = np.diff(self.row_starts)
        return np.repeat(np.arange(self.nrows, dtype=np.int64), counts)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.nrows, self.ncols))
        out[self.row_of_entry(), self.col_indices] = self.values
        return out

    @classmethod
    def from_coo(cls, nrows, ncols, rows, cols, vals) -> "SparseMatrix":
        """Build CSR from coordinate triplets.

        Entries may arrive in any order.  Duplicate coordinates are an
        error, never summed.
        """
        rows = _as_index_array(rows, "rows")
        cols = _as_index_array(cols, "cols")
        vals = np.asarray(vals, dtype=np.float64)
        if not (rows.shape == cols.shape == vals.shape):
            raise ValueError("coordinate arrays must have equal length")
        if rows.size:
            if rows.min() < 0 or rows.max() >= nrows:
                raise ValueError("row index out of range")
            if cols.min() < 0 or cols.max() >= ncols:
                raise ValueError("column index out of range")
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size > 1:
            dup = (np.diff(rows) == 0) & (np.diff(cols) == 0)
            if np.any(dup):
                k = int(np.argmax(dup))
                raise ValueError(
                    f"duplicate entry at row {rows[k]}, column {cols[k]}"
                )
        counts = np.bincount(rows, minlength=nrows) if rows.size else np.zeros(
            nrows, dtype=np.int64
        )
        row_starts = np.zeros(nrows + 1, dtype=np.int64)
        np.cumsum(counts, out=row_starts[1:])
        return cls(nrows, ncols, row_starts, cols, vals)

    @classmethod
    def from_dense(cls, dense) -> "SparseMatrix":
        dense = np.asarray(dense, dtype=np.float64)
        if dense.ndim != 2:
            raise ValueError("dense input must be two-dimensional")
        rows, cols = np.nonzero(dense)
        return cls.from_coo(
            dense.shape[0], dense.shape[1], rows, cols, dense[rows, cols]
        )

    @classmethod
    def identity(cls, n) -> "SparseMatrix":
        idx = np.arange(n, dtype=np.int64)
        return cls(n, n, np.arange(n + 1, dtype=np.int64), idx, np.ones(n))

    def with_values(self, values) -> "SparseMatrix":
        """Same sparsity pattern, new values (used by scaling steps)."""
        return SparseMatrix(
            self.nrows, self.ncols, self.row_starts, self.col_indices, values
        )


def spmv(A: SparseMatrix, x) -> np.ndarray:
    """Matrix-vector product with deterministic index-order summation.

    Accepts real or complex ``x``; the result dtype follows ``x``.
    """
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != A.ncols:
        raise ValueError(
            f"dimension mismatch: matrix has {A.ncols} columns, "
            f"vector has length {x.size}"
        )
    if np.iscomplexobj(x):
        x = np.asarray(x, dtype=np.complex128)
        out = np.zeros(A.nrows, dtype=np.complex128)
    else:
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros(A.nrows)
    _kernels.csr_matvec(A.row_starts, A.col_indices, A.values, x, out)
    return out


def segment_reduce(values, starts) -> np.ndarray:
    """Left-to-right sums of ``values`` over the segments in ``starts``."""
    values = np.asarray(values)
    if np.iscomplexobj(values):
        out = np.zeros(starts.shape[0] - 1, dtype=np.complex128)
        values = np.asarray(values, dtype=np.complex128)
    else:
        out = np.zeros(starts.shape[0] - 1)
        values = np.asarray(values, dtype=np.float64)
    _kernels.segment_sums(values, np.asarray(starts, dtype=np.int64), out)
    return out


def row_abs_sums(A: SparseMatrix) -> np.ndarray:
    """Per-row 1-norms, summed in index order."""
    return segment_reduce(np.abs(A.values), A.row_starts)


def transpose(A: SparseMatrix) -> SparseMatrix:
    """CSR transpose; rows stay sorted within each output row."""
    order = np.argsort(A.col_indices, kind="stable")
    t_cols = A.row_of_entry()[order]
    t_vals = A.values[order]
    counts = np.bincount(A.col_indices, minlength=A.ncols) if A.nnz else (
        np.zeros(A.ncols, dtype=np.int64)
    )
    t_starts = np.zeros(A.ncols + 1, dtype=np.int64)
    np.cumsum(counts, out=t_starts[1:])
    return SparseMatrix(A.ncols, A.nrows, t_starts, t_cols, t_vals)


def relative_residual(A: SparseMatrix, x, b) -> float:
    """Euclidean ``norm(A x - b) / norm(b)``."""
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 1 or b.shape[0] != A.nrows:
        raise ValueError(
            f"dimension mismatch: matrix has {A.nrows} rows, "
            f"right-hand side has length {b.size}"
        )
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        raise ValueError("relative residual is undefined for b = 0")
    r = spmv(A, x) - b
    return float(np.linalg.norm(r)) / bnorm


def random_rhs(n: int, seed: int) -> np.ndarray:
    """Standard-normal right-hand side from a portable seeded PRNG.

    Uses numpy's PCG64 bit generator through ``Generator.standard_normal``
    (ziggurat method), which is specified to produce identical streams
    for identical seeds on every platform.
    """
    if n < 1:
        raise ValueError("right-hand side length must be at least 1")
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    return rng.standard_normal(n)
