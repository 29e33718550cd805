"""Mapping between a linear system Ax = b and laser couplings.

The laser array can only realize bounded coupler strengths and stays
accurate only while phase excursions remain small, so the system is
rescaled on the way in and the scaling undone on the way out:

- ``sigma``: the maximum row 1-norm of A.  Dividing A and b by it keeps
  every row's total coupler magnitude within the unit budget.
- ``beta``: an additional scale on b alone.  The steady-state phases
  satisfy ``A phi = beta b``, i.e. ``phi = beta x``, so shrinking beta
  shrinks the working phase angles without changing the solution.

With the default ``stabilized`` sign, the encoded matrix and right-hand
side are jointly negated; the small-angle phase flow then contracts
toward the solution for matrices with spectrum in the right half-plane.
``as_written`` keeps the raw sign for fidelity experiments (the flow is
then anti-stable for positive-definite systems).

``normal_equations`` mode first replaces (A, b) by (A^T A, A^T b),
turning any full-rank system into a symmetric positive-definite one at
the cost of squaring the condition number.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
import scipy.sparse

from lasersolve.errors import EncodingError
from lasersolve.sparse import (
    SparseMatrix,
    row_abs_sums,
    spmv,
    transpose,
)

__all__ = [
    "EncodingConfig",
    "LpuProblem",
    "reference_couplings",
    "encode",
    "decode",
    "shrink_scale",
]

SYSTEM_MODES = ("direct", "normal_equations")
SIGNS = ("stabilized", "as_written")


@dataclasses.dataclass(frozen=True)
class EncodingConfig:
    """Knobs controlling how a system is mapped onto the device.

    theta_max
        Largest tolerated phase excursion in radians.  0.3 rad keeps
        sin(theta) within 1.5% of theta.
    system_mode
        "direct" encodes (A, b) as given; "normal_equations" encodes
        (A^T A, A^T b).
    beta_init
        Initial scale applied to b.  The run monitor halves it whenever
        phases outgrow theta_max.
    sign
        "stabilized" (negated encoding, contracting flow) or
        "as_written" (raw sign).
    """

    theta_max: float = 0.3
    system_mode: str = "direct"
    beta_init: float = 1e-3
    sign: str = "stabilized"

    def __post_init__(self):
        if not (0.0 < self.theta_max < math.pi / 2):
            raise ValueError("theta_max must lie in (0, pi/2)")
        if self.beta_init <= 0.0:
            raise ValueError("beta_init must be positive")
        if self.system_mode not in SYSTEM_MODES:
            raise ValueError(f"system_mode must be one of {SYSTEM_MODES}")
        if self.sign not in SIGNS:
            raise ValueError(f"sign must be one of {SIGNS}")


@dataclasses.dataclass(frozen=True)
class LpuProblem:
    """A linear system in device form.

    ``A_enc`` holds the inter-laser coupling coefficients, ``b_enc`` the
    per-laser phase-rotation coefficients, and ``c`` the couplings from
    the reference laser, fixed to the negated row sums of ``A_enc`` so
    that uniform phases with zero b are a fixed point.
    """

    A_enc: SparseMatrix
    b_enc: np.ndarray
    c: np.ndarray
    beta: float
    sigma: float
    n: int

    def __post_init__(self):
        if not self.A_enc.is_square or self.A_enc.nrows != self.n:
            raise ValueError("A_enc must be square of size n")
        b_enc = np.asarray(self.b_enc, dtype=np.float64)
        c = np.asarray(self.c, dtype=np.float64)
        if b_enc.shape != (self.n,) or c.shape != (self.n,):
            raise ValueError("b_enc and c must have length n")
        if not (np.all(np.isfinite(b_enc)) and np.all(np.isfinite(c))):
            raise ValueError("encoded coefficients must be finite")
        if self.beta <= 0.0 or self.sigma <= 0.0:
            raise ValueError("beta and sigma must be positive")
        for name, arr in (("b_enc", b_enc), ("c", c)):
            arr = arr.copy() if not arr.flags.owndata else arr
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def reference_couplings(A: SparseMatrix) -> np.ndarray:
    """Negated row sums, summed in index order.

    Computed as -spmv(A, ones): the identical kernel and summation
    order used everywhere else, so c + A.1 cancels exactly.
    """
    if not A.is_square:
        raise ValueError("coupling matrix must be square")
    return -spmv(A, np.ones(A.ncols))


def _normal_equations(A: SparseMatrix, b: np.ndarray):
    """Replace (A, b) by (A^T A, A^T b).

    The sparse-sparse product comes from scipy (a native product would
    be quadratic work in pure Python); its row entries are re-sorted
    into canonical order.  Downstream reductions over the product use
    this package's deterministic kernels as usual.
    """
    At = transpose(A)
    atb = spmv(At, b)
    sp = scipy.sparse.csr_array(
        (A.values, A.col_indices, A.row_starts), shape=A.shape
    )
    product = (sp.T @ sp).tocsr()
    product.sum_duplicates()
    product.sort_indices()
    ata = SparseMatrix(
        A.ncols,
        A.ncols,
        product.indptr.astype(np.int64),
        product.indices.astype(np.int64),
        product.data,
    )
    return ata, atb


def encode(A: SparseMatrix, b, cfg: EncodingConfig) -> LpuProblem:
    """Map (A, b) onto coupler strengths and scales."""
    b = np.asarray(b, dtype=np.float64)
    if not A.is_square:
        raise ValueError("system matrix must be square")
    if b.shape != (A.nrows,):
        raise ValueError("right-hand side length must match the matrix")
    if not np.all(np.isfinite(b)):
        raise ValueError("right-hand side must be finite")
    if A.nrows == 0:
        raise ValueError("empty system")
    if cfg.system_mode == "normal_equations":
        A, b = _normal_equations(A, b)

    sigma = float(row_abs_sums(A).max()) if A.nnz else 0.0
    if sigma == 0.0:
        raise EncodingError("cannot encode a zero matrix (sigma = 0)")
    if float(np.linalg.norm(b)) == 0.0:
        raise EncodingError("cannot encode b = 0")

    values = A.values / sigma
    b_enc = b * (cfg.beta_init / sigma)
    if cfg.sign == "stabilized":
        values = -values
        b_enc = -b_enc
    A_enc = A.with_values(values)
    return LpuProblem(
        A_enc=A_enc,
        b_enc=b_enc,
        c=reference_couplings(A_enc),
        beta=cfg.beta_init,
        sigma=sigma,
        n=A.nrows,
    )


def decode(phases, problem: LpuProblem) -> np.ndarray:
    """Recover x from steady-state phases.

    ``phases`` has length n+1 with the reference laser at index 0; the
    solution is read off the phase differences against the reference.
    The steady state satisfies (A/sigma) phi = (beta/sigma) b, in which
    sigma cancels, so only beta needs undoing: x = (phi - phi_0)/beta.
    """
    phases = np.asarray(phases, dtype=np.float64)
    if phases.shape != (problem.n + 1,):
        raise ValueError("phases must have length n + 1")
    if not np.all(np.isfinite(phases)):
        raise ValueError("phases must be finite")
    if problem.beta == 0.0:
        raise ValueError("beta must be nonzero to decode")
    return (phases[1:] - phases[0]) / problem.beta


def shrink_scale(problem: LpuProblem, factor: float) -> LpuProblem:
    """Shrink the working phase scale: beta and b_enc contract by
    ``factor``; couplings, c, and sigma are untouched."""
    if not (0.0 < factor < 1.0):
        raise ValueError("shrink factor must lie in (0, 1)")
    return dataclasses.replace(
        problem,
        beta=problem.beta * factor,
        b_enc=problem.b_enc * factor,
    )
