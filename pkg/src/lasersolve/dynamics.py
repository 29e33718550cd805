"""Coupled-laser dynamics driven to steady state.

Three modes share one stepping surface:

- ``FullField``: complex fields with saturable gain.  Each laser's
  field is pushed by gain-weighted couplings from the other lasers, a
  90-degree-rotated self term proportional to its b coefficient, and a
  drive from the fixed reference laser.
- ``PhaseOnly``: amplitudes pinned to D; only phases evolve, under
  coupling sines of pairwise phase differences.  In the small-angle
  regime this flow is a continuous-time Richardson iteration on the
  encoded system.
- ``GenericCavity``: an explicit complex coupling matrix K with a
  gain-weighted loss term; no reference laser, no encoded system.

Time is measured in cavity roundtrips: one roundtrip is ``1/dt``
integrator steps, and reported solve time is roundtrips times the
physical roundtrip duration (20 ns by default).
"""

from __future__ import annotations

import dataclasses
import enum
import os

import numpy as np

from lasersolve.encoding import LpuProblem, decode, shrink_scale
from lasersolve.errors import DynamicsError, RestartBudgetError
from lasersolve.sparse import (
    SparseMatrix,
    relative_residual,
    segment_reduce,
    spmv,
)

__all__ = [
    "CavityParams",
    "LaserState",
    "RunResult",
    "DynamicsMode",
    "gain_loss",
    "gain_derivative",
    "field_derivative",
    "phase_derivative",
    "linearized_phase_derivative",
    "cavity_derivative",
    "stationary_gain",
    "initial_state",
    "step",
    "run",
    "write_trace_csv",
]


class DynamicsMode(enum.Enum):
    FullField = "full_field"
    PhaseOnly = "phase_only"
    GenericCavity = "generic_cavity"


@dataclasses.dataclass(frozen=True)
class CavityParams:
    """Physical constants of the emulated cavity.

    ``P`` defaults to 2*alpha*(1 + D^2), the pump at which the
    stationary gain for amplitude D equals the loss alpha, so the
    gain/loss factor is exactly 1 at the operating point.
    ``dt`` is the integrator step in roundtrips; runs require 1/dt to
    be a whole number of sub-steps so roundtrip counts stay integral.
    """

    tau: float = 1.0
    tau_G: float = 10.0
    alpha: float = 0.1
    D: float = 1.0
    P: float | None = None
    dt: float = 1.0
    roundtrip_ns: int = 20

    def __post_init__(self):
        if self.P is None:
            object.__setattr__(self, "P", 2.0 * self.alpha * (1.0 + self.D * self.D))
        if self.tau <= 0.0 or self.tau_G <= 0.0 or self.dt <= 0.0:
            raise ValueError("tau, tau_G, and dt must be positive")
        if self.alpha < 0.0:
            raise ValueError("alpha must be nonnegative")
        if self.P <= 0.0:
            raise ValueError("pump P must be positive")
        if self.D <= 0.0:
            raise ValueError("target amplitude D must be positive")
        if int(self.roundtrip_ns) != self.roundtrip_ns or self.roundtrip_ns <= 0:
            raise ValueError("roundtrip_ns must be a positive integer")
        object.__setattr__(self, "roundtrip_ns", int(self.roundtrip_ns))


@dataclasses.dataclass(frozen=True)
class LaserState:
    """Fields and gains of every laser, reference at index 0."""

    fields: np.ndarray
    gains: np.ndarray

    def __post_init__(self):
        fields = np.asarray(self.fields, dtype=np.complex128)
        gains = np.asarray(self.gains, dtype=np.float64)
        if fields.ndim != 1 or gains.ndim != 1:
            raise ValueError("fields and gains must be one-dimensional")
        if fields.shape != gains.shape:
            raise ValueError("fields and gains must have equal length")
        if fields.shape[0] < 1:
            raise ValueError("state needs at least one laser")
        for name, arr in (("fields", fields), ("gains", gains)):
            arr = arr.copy() if not arr.flags.owndata else arr
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_lasers(self) -> int:
        return int(self.fields.shape[0])

    def phases(self) -> np.ndarray:
        return np.angle(self.fields)


@dataclasses.dataclass(frozen=True)
class RunResult:
    """Outcome of one integration, in device-time units.

    ``time_ns`` is always ``roundtrips * roundtrip_ns`` (the roundtrip
    model), never wall clock.  ``residual_trace`` holds the
    (cumulative roundtrip, relative residual) pairs sampled at check
    points; ``max_phase_trace`` the matching phase excursions.
    """

    roundtrips: int
    time_ns: int
    converged: bool
    final_residual: float
    residual_trace: tuple
    max_phase_seen: float
    decoded_x: np.ndarray
    restarts: int = 0
    max_phase_trace: tuple = ()

    def __post_init__(self):
        x = np.asarray(self.decoded_x, dtype=np.float64)
        x = x.copy() if not x.flags.owndata else x
        x.setflags(write=False)
        object.__setattr__(self, "decoded_x", x)


def gain_loss(G, alpha):
    """Round-trip amplification factor exp(G - alpha)."""
    return np.exp(np.asarray(G, dtype=np.float64) - alpha)


def stationary_gain(params: CavityParams, amplitude: float | None = None) -> float:
    """Gain at which the gain equation is stationary for |E| = amplitude."""
    amp = params.D if amplitude is None else amplitude
    return params.P / (2.0 * (1.0 + amp * amp))


def gain_derivative(G, E, params: CavityParams):
    """dG/dt = (P - 2 G (1 + |E|^2)) / tau_G, elementwise."""
    G = np.asarray(G, dtype=np.float64)
    intensity = np.abs(np.asarray(E)) ** 2
    return (params.P - 2.0 * G * (1.0 + intensity)) / params.tau_G


def _field_rhs(fields, gains, problem: LpuProblem, params: CavityParams):
    g = np.exp(gains - params.alpha)
    weighted = g[1:] * fields[1:]
    coupled = spmv(problem.A_enc, weighted)
    rotation = -1j * problem.b_enc * weighted
    drive = problem.c * (g[0] * fields[0])
    out = np.zeros(problem.n + 1, dtype=np.complex128)
    out[1:] = coupled + rotation + drive
    return out


def field_derivative(state: LaserState, problem: LpuProblem, params: CavityParams):
    """Field time-derivative for lasers 1..n; the reference is pinned.

    dE_i/dt = sum_j a_ij g_j E_j - 1j b_i g_i E_i + c_i g_0 E_0, with g
    the per-laser gain/loss factor.  The -1j factor realizes the
    90-degree phase added to each laser's self term.
    """
    if state.n_lasers != problem.n + 1:
        raise ValueError(
            f"state has {state.n_lasers} lasers, problem needs {problem.n + 1}"
        )
    return _field_rhs(state.fields, state.gains, problem, params)


def phase_derivative(phases, problem: LpuProblem, g: float):
    """Phase flow of the amplitude-pinned array.

    phi_dot_i = g * (sum_j a_ij sin(phi_j - phi_i) - b_i
                     + c_i sin(phi_0 - phi_i)) for i >= 1;
    the reference phase does not move.  Coupling sums run in index
    order.
    """
    phases = np.asarray(phases, dtype=np.float64)
    if phases.ndim != 1 or phases.shape[0] != problem.n + 1:
        raise ValueError(
            f"phases must have length {problem.n + 1}, got {phases.size}"
        )
    p = phases[1:]
    A = problem.A_enc
    sines = np.sin(p[A.col_indices] - p[A.row_of_entry()])
    coupled = segment_reduce(A.values * sines, A.row_starts)
    ref = problem.c * np.sin(phases[0] - p)
    out = np.zeros(problem.n + 1)
    out[1:] = g * (coupled - problem.b_enc + ref)
    return out


def linearized_phase_derivative(phases, problem: LpuProblem, g: float):
    """Small-angle limit of ``phase_derivative``.

    Replacing every sine by its argument collapses the flow to
    phi_dot = g * (A_enc phi + c phi_0 - b_enc): a continuous-time
    Richardson iteration.  Euler steps of this flow reproduce the
    discrete Richardson update bit for bit.
    """
    phases = np.asarray(phases, dtype=np.float64)
    if phases.ndim != 1 or phases.shape[0] != problem.n + 1:
        raise ValueError(
            f"phases must have length {problem.n + 1}, got {phases.size}"
        )
    p = phases[1:]
    out = np.zeros(problem.n + 1)
    out[1:] = g * (
        spmv(problem.A_enc, p) + problem.c * phases[0] - problem.b_enc
    )
    return out


def cavity_derivative(state: LaserState, K, params: CavityParams):
    """Generic-cavity field derivative with gain-weighted loss.

    dE_i/dt = (sum_j exp(G_j - alpha) K_ij E_j - exp(G_i - alpha) E_i)
              / tau.
    The self-coupling K_ii term carries the laser's own gain factor, so
    K = I makes the loss term cancel identically.
    """
    K = np.asarray(K, dtype=np.complex128)
    n = state.n_lasers
    if K.shape != (n, n):
        raise ValueError(f"K must be {n}x{n}, got {K.shape}")
    g = np.exp(state.gains - params.alpha)
    weighted = g * state.fields
    return (K @ weighted - weighted) / params.tau


def initial_state(problem: LpuProblem, params: CavityParams) -> LaserState:
    """All phases aligned with the reference, gains stationary at D."""
    n_total = problem.n + 1
    fields = np.full(n_total, params.D, dtype=np.complex128)
    gains = np.full(n_total, stationary_gain(params))
    return LaserState(fields=fields, gains=gains)


def _cavity_rhs(fields, gains, K, params):
    g = np.exp(gains - params.alpha)
    weighted = g * fields
    dE = (K @ weighted - weighted) / params.tau
    dG = (params.P - 2.0 * gains * (1.0 + np.abs(fields) ** 2)) / params.tau_G
    return dE, dG


def _full_rhs(fields, gains, problem, params):
    dE = _field_rhs(fields, gains, problem, params)
    dG = (params.P - 2.0 * gains * (1.0 + np.abs(fields) ** 2)) / params.tau_G
    return dE, dG


def _advance_pair(fields, gains, rhs, dt, integrator):
    if integrator == "euler":
        dE, dG = rhs(fields, gains)
        return fields + dt * dE, gains + dt * dG
    k1e, k1g = rhs(fields, gains)
    k2e, k2g = rhs(fields + 0.5 * dt * k1e, gains + 0.5 * dt * k1g)
    k3e, k3g = rhs(fields + 0.5 * dt * k2e, gains + 0.5 * dt * k2g)
    k4e, k4g = rhs(fields + dt * k3e, gains + dt * k3g)
    new_fields = fields + (dt / 6.0) * (k1e + 2.0 * k2e + 2.0 * k3e + k4e)
    new_gains = gains + (dt / 6.0) * (k1g + 2.0 * k2g + 2.0 * k3g + k4g)
    return new_fields, new_gains


def _advance_phases(phases, rhs, dt, integrator):
    if integrator == "euler":
        return phases + dt * rhs(phases)
    k1 = rhs(phases)
    k2 = rhs(phases + 0.5 * dt * k1)
    k3 = rhs(phases + 0.5 * dt * k2)
    k4 = rhs(phases + dt * k3)
    return phases + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_integrator(integrator) -> str:
    integ = str(integrator).lower()
    if integ not in ("euler", "rk4"):
        raise ValueError("integrator must be 'Euler' or 'RK4'")
    return integ


def step(
    state: LaserState,
    mode: DynamicsMode,
    system,
    params: CavityParams,
    integrator: str = "euler",
) -> LaserState:
    """Advance the state by one integrator step of dt roundtrips.

    ``system`` is an ``LpuProblem`` for FullField/PhaseOnly and a dense
    complex coupling matrix for GenericCavity.  PhaseOnly rebuilds every
    field as D * exp(1j * phi), pinning amplitudes each step; its gain
    factor is evaluated at the stationary gain for amplitude D.
    Raises ``DynamicsError`` when the new state is non-finite.
    """
    integ = _check_integrator(integrator)
    dt = params.dt
    if mode is DynamicsMode.GenericCavity:
        if isinstance(system, LpuProblem):
            raise ValueError(
                "GenericCavity takes an explicit coupling matrix, "
                "not an encoded problem"
            )
        K = np.asarray(system, dtype=np.complex128)
        n = state.n_lasers
        if K.shape != (n, n):
            raise ValueError(f"K must be {n}x{n}, got {K.shape}")
        new_fields, new_gains = _advance_pair(
            state.fields,
            state.gains,
            lambda E, G: _cavity_rhs(E, G, K, params),
            dt,
            integ,
        )
    elif mode is DynamicsMode.PhaseOnly:
        problem = _require_problem(system, state)
        g = float(gain_loss(stationary_gain(params), params.alpha))
        new_phases = _advance_phases(
            state.phases(),
            lambda ph: phase_derivative(ph, problem, g),
            dt,
            integ,
        )
        if not np.all(np.isfinite(new_phases)):
            raise DynamicsError("non-finite phases after step")
        new_fields = params.D * np.exp(1j * new_phases)
        new_gains = state.gains
    elif mode is DynamicsMode.FullField:
        problem = _require_problem(system, state)
        new_fields, new_gains = _advance_pair(
            state.fields,
            state.gains,
            lambda E, G: _full_rhs(E, G, problem, params),
            dt,
            integ,
        )
    else:
        raise ValueError(f"unknown dynamics mode: {mode!r}")

    if not (np.all(np.isfinite(new_fields)) and np.all(np.isfinite(new_gains))):
        raise DynamicsError("non-finite state after step (divergence)")
    return LaserState(fields=new_fields, gains=new_gains)


def _require_problem(system, state) -> LpuProblem:
    if not isinstance(system, LpuProblem):
        raise ValueError("this mode requires an encoded problem")
    if state.n_lasers != system.n + 1:
        raise ValueError(
            f"state has {state.n_lasers} lasers, problem needs {system.n + 1}"
        )
    return system


def _substeps_per_roundtrip(dt: float) -> int:
    sub = round(1.0 / dt)
    if sub < 1 or abs(sub * dt - 1.0) > 1e-9:
        raise ValueError(
            "dt must divide one roundtrip into a whole number of steps"
        )
    return sub


def run(
    problem: LpuProblem,
    A_orig: SparseMatrix,
    b_orig,
    params: CavityParams,
    mode: DynamicsMode,
    tol: float = 1e-5,
    check_every: int = 100,
    max_roundtrips: int = 100_000,
    *,
    integrator: str = "euler",
    theta_max: float = 0.3,
    max_restarts: int = 10,
) -> RunResult:
    """Integrate to steady state and decode the solution.

    Starts from aligned phases and stationary gains.  Every
    ``check_every`` roundtrips the phases are decoded and the relative
    residual is evaluated against the ORIGINAL system (A_orig, b_orig).
    If the largest phase excursion exceeds ``theta_max``, the working
    scale is halved and the integration restarts, keeping the
    cumulative roundtrip count; ``RestartBudgetError`` after
    ``max_restarts`` such restarts.  Reaching ``max_roundtrips`` without
    converging returns a non-converged result, not an exception.
    """
    if mode not in (DynamicsMode.FullField, DynamicsMode.PhaseOnly):
        raise ValueError("run() solves encoded problems; use step() for "
                         "GenericCavity studies")
    if tol <= 0.0:
        raise ValueError("tolerance must be positive")
    if check_every < 1 or max_roundtrips < 1:
        raise ValueError("check_every and max_roundtrips must be >= 1")
    b_orig = np.asarray(b_orig, dtype=np.float64)
    if not A_orig.is_square or b_orig.shape != (A_orig.nrows,):
        raise ValueError("original system dimensions are inconsistent")
    substeps = _substeps_per_roundtrip(params.dt)
    integ = _check_integrator(integrator)

    current = problem
    state = initial_state(current, params)
    total_roundtrips = 0
    restarts = 0
    max_phase_seen = 0.0
    trace = []
    phase_trace = []

    while True:
        advance = min(check_every, max_roundtrips - total_roundtrips)
        for _ in range(advance * substeps):
            state = step(state, mode, current, params, integ)
        total_roundtrips += advance

        phases = state.phases()
        excursion = float(np.max(np.abs(phases[1:] - phases[0])))
        max_phase_seen = max(max_phase_seen, excursion)
        x = decode(phases, current)
        residual = relative_residual(A_orig, x, b_orig)
        trace.append((total_roundtrips, residual))
        phase_trace.append(excursion)

        converged = residual <= tol
        if converged or total_roundtrips >= max_roundtrips:
            return RunResult(
                roundtrips=total_roundtrips,
                time_ns=total_roundtrips * params.roundtrip_ns,
                converged=converged,
                final_residual=residual,
                residual_trace=tuple(trace),
                max_phase_seen=max_phase_seen,
                decoded_x=x,
                restarts=restarts,
                max_phase_trace=tuple(phase_trace),
            )

        if excursion > theta_max:
            restarts += 1
            if restarts > max_restarts:
                raise RestartBudgetError(
                    f"phase excursion {excursion:.3g} rad still exceeds "
                    f"{theta_max} rad after {max_restarts} scale restarts"
                )
            current = shrink_scale(current, 0.5)
            state = initial_state(current, params)


def write_trace_csv(result: RunResult, target):
    """Dump the residual trace as CSV (roundtrip, residual, max_phase)."""
    own = isinstance(target, (str, os.PathLike))
    fh = open(target, "w", encoding="ascii") if own else target
    try:
        fh.write("roundtrip,residual,max_phase\n")
        for (roundtrip, residual), max_phase in zip(
            result.residual_trace, result.max_phase_trace
        ):
            fh.write(f"{roundtrip},{residual:.17g},{max_phase:.17g}\n")
    finally:
        if own:
            fh.close()
