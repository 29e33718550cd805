"""Compiled kernels for deterministic index-order CSR arithmetic.

Both kernels accumulate strictly left to right within each row so that
repeated runs produce bit-identical results.  numpy's own reductions
(pairwise summation, BLAS dot) do not guarantee a fixed association
order across array sizes, which is why these exist.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def csr_matvec(row_starts, col_indices, values, x, out):
    # out must arrive zero-filled; its dtype fixes the accumulator type.
    nrows = row_starts.shape[0] - 1
    for i in range(nrows):
        s = out[i]
        for k in range(row_starts[i], row_starts[i + 1]):
            s = s + values[k] * x[col_indices[k]]
        out[i] = s


@njit(cache=True)
def segment_sums(values, starts, out):
    # Sums values[starts[i]:starts[i+1]] left to right into out[i].
    nseg = starts.shape[0] - 1
    for i in range(nseg):
        s = out[i]
        for k in range(starts[i], starts[i + 1]):
            s = s + values[k]
        out[i] = s


def warm_up():
    """Trigger compilation of every kernel signature used by the package."""
    rs = np.array([0, 1], dtype=np.int64)
    ci = np.array([0], dtype=np.int64)
    v = np.array([1.0])
    csr_matvec(rs, ci, v, np.array([1.0]), np.zeros(1))
    csr_matvec(rs, ci, v, np.array([1.0 + 0j]), np.zeros(1, dtype=np.complex128))
    segment_sums(v, rs, np.zeros(1))
    segment_sums(np.array([1.0 + 0j]), rs, np.zeros(1, dtype=np.complex128))
