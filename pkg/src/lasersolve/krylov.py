"""Native iterative solvers: CG, restarted GMRES, BiCGSTAB, Richardson.

Shared protocol: the initial iterate is always zero, and convergence is
decided on the explicitly recomputed true residual norm(A x - b)/norm(b)
rather than the recurrence residual.  Numerical breakdown ends the
iteration with a distinct non-convergence reason on the outcome; it
never raises.  ``apply_time_ns`` clocks the iteration loop only.
"""

from __future__ import annotations

import dataclasses
import time

import numpy as np

from lasersolve.sparse import SparseMatrix, spmv

__all__ = ["SolverSpec", "SolveOutcome", "solve", "richardson"]

KINDS = ("cg", "gmres", "bicgstab", "richardson")

# Absolute guard against division by a denormal-or-zero pivot.
_TINY = 1e-300


@dataclasses.dataclass(frozen=True)
class SolverSpec:
    """Which solver to run and under what limits.

    ``restart`` applies to GMRES only; ``omega`` to Richardson only.
    ``label`` overrides the display name used in benchmark reports.
    """

    kind: str
    tol: float = 1e-5
    max_iterations: int = 10_000
    restart: int = 30
    omega: float = 1.0
    label: str | None = None

    def __post_init__(self):
        kind = str(self.kind).lower()
        if kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.restart < 1:
            raise ValueError("restart length must be at least 1")
        if self.omega == 0.0:
            raise ValueError("omega must be nonzero")

    @property
    def display_label(self) -> str:
        if self.label:
            return self.label
        if self.kind == "cg":
            return "CG"
        if self.kind == "gmres":
            return f"GMRES({self.restart})"
        if self.kind == "bicgstab":
            return "BiCGSTAB"
        return f"Richardson(omega={self.omega:g})"


@dataclasses.dataclass(frozen=True)
class SolveOutcome:
    """Result of one solve.

    ``reason`` is "converged", "max_iterations", "diverged", or
    "breakdown: <detail>".  ``residual_history`` holds per-iteration
    relative residuals (GMRES records its in-cycle estimates, with the
    true residual appended at each cycle boundary).
    """

    x: np.ndarray
    iterations: int
    converged: bool
    final_residual: float
    apply_time_ns: int
    reason: str
    residual_history: tuple = ()

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        x = x.copy() if not x.flags.owndata else x
        x.setflags(write=False)
        object.__setattr__(self, "x", x)


def _validate_system(A: SparseMatrix, b) -> tuple[np.ndarray, float]:
    if not A.is_square:
        raise ValueError("solvers require a square matrix")
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (A.nrows,):
        raise ValueError(
            f"right-hand side length {b.size} does not match n = {A.nrows}"
        )
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        raise ValueError("right-hand side must be nonzero")
    return b, bnorm


def solve(A: SparseMatrix, b, spec: SolverSpec, callback=None) -> SolveOutcome:
    """Run the solver selected by ``spec`` from a zero initial iterate.

    ``callback(iteration, x, relative_residual)``, when given, fires
    after every accepted iterate (used for convergence studies; adds no
    work when absent).
    """
    b, bnorm = _validate_system(A, b)
    if spec.kind == "cg":
        return _cg(A, b, bnorm, spec, callback)
    if spec.kind == "gmres":
        return _gmres(A, b, bnorm, spec, callback)
    if spec.kind == "bicgstab":
        return _bicgstab(A, b, bnorm, spec, callback)
    return _richardson(A, b, bnorm, spec.omega, spec.tol,
                       spec.max_iterations, callback)


def richardson(A: SparseMatrix, b, omega: float, tol: float = 1e-5,
               max_iterations: int = 10_000, callback=None) -> SolveOutcome:
    """Stationary iteration x <- x + omega (b - A x) from x = 0.

    Declared diverged (reason "diverged") as soon as the relative
    residual exceeds 10x its initial value of 1.
    """
    if omega == 0.0:
        raise ValueError("omega must be nonzero")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    b, bnorm = _validate_system(A, b)
    return _richardson(A, b, bnorm, omega, tol, max_iterations, callback)


def _true_residual(A, x, b, bnorm) -> float:
    return float(np.linalg.norm(b - spmv(A, x))) / bnorm


def _finish(x, iterations, converged, residual, t0, reason, history):
    return SolveOutcome(
        x=x,
        iterations=iterations,
        converged=converged,
        final_residual=residual,
        apply_time_ns=time.perf_counter_ns() - t0,
        reason=reason,
        residual_history=tuple(history),
    )


def _cg(A, b, bnorm, spec, callback):
    n = A.nrows
    x = np.zeros(n)
    r = b.copy()
    p = r.copy()
    rs = float(r @ r)
    history = []
    reason = "max_iterations"
    converged = False
    iterations = 0
    rel = 1.0
    t0 = time.perf_counter_ns()
    for k in range(1, spec.max_iterations + 1):
        Ap = spmv(A, p)
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            # Curvature along p is nonpositive: the matrix is not SPD.
            reason = "breakdown: nonpositive curvature (matrix not SPD)"
            break
        step = rs / pAp
        x = x + step * p
        r = r - step * Ap
        iterations = k
        rel = _true_residual(A, x, b, bnorm)
        history.append(rel)
        if callback is not None:
            callback(k, x, rel)
        if rel <= spec.tol:
            converged = True
            reason = "converged"
            break
        rs_next = float(r @ r)
        p = r + (rs_next / rs) * p
        rs = rs_next
    return _finish(x, iterations, converged, rel, t0, reason, history)


def _gmres(A, b, bnorm, spec, callback):
    n = A.nrows
    m = min(spec.restart, n)
    x = np.zeros(n)
    history = []
    reason = "max_iterations"
    converged = False
    total = 0
    rel = 1.0
    t0 = time.perf_counter_ns()
    while total < spec.max_iterations:
        r = b - spmv(A, x)
        beta = float(np.linalg.norm(r))
        rel = beta / bnorm
        if rel <= spec.tol:
            converged = True
            reason = "converged"
            break
        V = np.zeros((m + 1, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        k = 0
        happy = False
        while k < m and total < spec.max_iterations:
            w = spmv(A, V[k])
            for i in range(k + 1):
                H[i, k] = float(V[i] @ w)
                w = w - H[i, k] * V[i]
            hk = float(np.linalg.norm(w))
            H[k + 1, k] = hk
            total += 1
            if hk > _TINY:
                V[k + 1] = w / hk
            # Givens rotations keep the residual estimate O(1) work.
            for i in range(k):
                t = cs[i] * H[i, k] + sn[i] * H[i + 1, k]
                H[i + 1, k] = -sn[i] * H[i, k] + cs[i] * H[i + 1, k]
                H[i, k] = t
            denom = float(np.hypot(H[k, k], H[k + 1, k]))
            if denom <= _TINY:
                # Column added nothing usable; solve with the previous k.
                happy = True
                break
            cs[k] = H[k, k] / denom
            sn[k] = H[k + 1, k] / denom
            H[k, k] = denom
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            k += 1
            estimate = abs(g[k]) / bnorm
            history.append(estimate)
            if hk <= _TINY:
                happy = True
            if happy or estimate <= spec.tol:
                break
        if k > 0:
            y = np.linalg.solve(H[:k, :k], g[:k])
            x = x + V[:k].T @ y
        rel = _true_residual(A, x, b, bnorm)
        history.append(rel)
        if callback is not None:
            callback(total, x, rel)
        if rel <= spec.tol:
            converged = True
            reason = "converged"
            break
        if happy:
            # The Krylov space closed without reaching the tolerance.
            reason = "breakdown: Krylov space closed before tolerance"
            break
    return _finish(x, total, converged, rel, t0, reason, history)


def _bicgstab(A, b, bnorm, spec, callback):
    n = A.nrows
    x = np.zeros(n)
    r = b.copy()
    rhat = b.copy()
    p = np.zeros(n)
    v = np.zeros(n)
    rho_prev = 1.0
    alpha = 1.0
    omega = 1.0
    history = []
    reason = "max_iterations"
    converged = False
    iterations = 0
    rel = 1.0
    t0 = time.perf_counter_ns()
    for k in range(1, spec.max_iterations + 1):
        rho = float(rhat @ r)
        if abs(rho) <= _TINY:
            reason = "breakdown: rho = 0 (shadow residual orthogonal)"
            break
        if k == 1:
            p = r.copy()
        else:
            if abs(omega) <= _TINY:
                reason = "breakdown: omega = 0 (stabilization stalled)"
                break
            beta = (rho / rho_prev) * (alpha / omega)
            p = r + beta * (p - omega * v)
        v = spmv(A, p)
        rhat_v = float(rhat @ v)
        if abs(rhat_v) <= _TINY:
            reason = "breakdown: rhat . Ap = 0"
            break
        alpha = rho / rhat_v
        s = r - alpha * v
        t_vec = spmv(A, s)
        tt = float(t_vec @ t_vec)
        if tt <= _TINY:
            # s is (numerically) in the null direction: x + alpha p is exact.
            x = x + alpha * p
            iterations = k
            rel = _true_residual(A, x, b, bnorm)
            history.append(rel)
            if callback is not None:
                callback(k, x, rel)
            if rel <= spec.tol:
                converged = True
                reason = "converged"
            else:
                reason = "breakdown: t = 0 before tolerance"
            break
        omega = float(t_vec @ s) / tt
        x = x + alpha * p + omega * s
        r = s - omega * t_vec
        iterations = k
        rel = _true_residual(A, x, b, bnorm)
        history.append(rel)
        if callback is not None:
            callback(k, x, rel)
        if rel <= spec.tol:
            converged = True
            reason = "converged"
            break
        rho_prev = rho
    return _finish(x, iterations, converged, rel, t0, reason, history)


def _richardson(A, b, bnorm, omega, tol, max_iterations, callback):
    x = np.zeros(A.nrows)
    r = b.copy()
    history = []
    reason = "max_iterations"
    converged = False
    iterations = 0
    rel = 1.0
    t0 = time.perf_counter_ns()
    for k in range(1, max_iterations + 1):
        x = x + omega * r
        r = b - spmv(A, x)
        iterations = k
        rel = float(np.linalg.norm(r)) / bnorm
        history.append(rel)
        if callback is not None:
            callback(k, x, rel)
        if rel <= tol:
            converged = True
            reason = "converged"
            break
        if rel > 10.0:
            reason = "diverged"
            break
    return _finish(x, iterations, converged, rel, t0, reason, history)
