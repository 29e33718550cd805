import math

import numpy as np
import pytest

from helpers import check_run_result, diag_dominant_spd, lu_solve, rel_err
from lasersolve.dynamics import (
    CavityParams,
    DynamicsMode,
    LaserState,
    cavity_derivative,
    field_derivative,
    gain_derivative,
    gain_loss,
    initial_state,
    linearized_phase_derivative,
    phase_derivative,
    run,
    stationary_gain,
    step,
    write_trace_csv,
)
from lasersolve.encoding import EncodingConfig, encode
from lasersolve.errors import DynamicsError, RestartBudgetError
from lasersolve.sparse import SparseMatrix


def _system(n=8, seed=1, **cfg_kwargs):
    dense = diag_dominant_spd(n, seed)
    A = SparseMatrix.from_dense(dense)
    b = np.random.default_rng(seed + 90).standard_normal(n)
    prob = encode(A, b, EncodingConfig(**cfg_kwargs))
    return dense, A, b, prob


def test_default_operating_point_is_unit_gain():
    p = CavityParams()
    assert p.P == 0.4
    assert stationary_gain(p) == 0.1
    assert gain_loss(stationary_gain(p), p.alpha) == 1.0


def test_params_validation():
    with pytest.raises(ValueError):
        CavityParams(tau=0.0)
    with pytest.raises(ValueError):
        CavityParams(tau_G=-1.0)
    with pytest.raises(ValueError):
        CavityParams(alpha=-0.1)
    with pytest.raises(ValueError):
        CavityParams(P=0.0)
    with pytest.raises(ValueError):
        CavityParams(D=0.0)
    with pytest.raises(ValueError):
        CavityParams(dt=0.0)
    with pytest.raises(ValueError):
        CavityParams(roundtrip_ns=0)
    assert CavityParams(alpha=0.2, D=2.0).P == 2.0 * 0.2 * 5.0


def test_laser_state():
    s = LaserState(fields=np.ones(3), gains=np.zeros(3))
    assert s.n_lasers == 3
    assert s.fields.dtype == np.complex128
    assert np.array_equal(s.phases(), np.zeros(3))
    with pytest.raises(ValueError):
        s.fields[0] = 2.0
    with pytest.raises(ValueError):
        LaserState(fields=np.ones(3), gains=np.zeros(2))
    with pytest.raises(ValueError):
        LaserState(fields=np.ones(0), gains=np.zeros(0))


def test_initial_state():
    _, _, _, prob = _system()
    p = CavityParams(D=1.5)
    s = initial_state(prob, p)
    assert s.n_lasers == prob.n + 1
    assert np.all(s.fields == 1.5 + 0.0j)
    assert np.all(s.gains == stationary_gain(p))


def test_gain_derivative_formula():
    p = CavityParams()
    G = np.array([0.05, 0.2])
    E = np.array([1.0 + 0.0j, 0.5 - 0.5j])
    want = (p.P - 2.0 * G * (1.0 + np.abs(E) ** 2)) / p.tau_G
    assert np.allclose(gain_derivative(G, E, p), want, rtol=1e-15)
    assert gain_derivative(stationary_gain(p), 1.0 + 0.0j, p) == 0.0


def test_field_derivative_matches_dense_oracle():
    _, _, _, prob = _system(n=6, seed=3)
    p = CavityParams()
    rng = np.random.default_rng(7)
    fields = rng.standard_normal(7) + 1j * rng.standard_normal(7)
    gains = rng.uniform(0.0, 0.3, 7)
    state = LaserState(fields=fields, gains=gains)
    got = field_derivative(state, prob, p)

    g = np.exp(gains - p.alpha)
    A = prob.A_enc.to_dense()
    want = np.zeros(7, dtype=np.complex128)
    for i in range(6):
        acc = 0.0 + 0.0j
        for j in range(6):
            acc += A[i, j] * (g[j + 1] * fields[j + 1])
        acc += -1j * prob.b_enc[i] * (g[i + 1] * fields[i + 1])
        acc += prob.c[i] * (g[0] * fields[0])
        want[i + 1] = acc
    assert got[0] == 0.0
    assert np.allclose(got, want, rtol=1e-13, atol=1e-16)
    with pytest.raises(ValueError):
        field_derivative(LaserState(fields=np.ones(3), gains=np.zeros(3)),
                         prob, p)


def test_phase_derivative_matches_dense_oracle():
    _, _, _, prob = _system(n=6, seed=5)
    rng = np.random.default_rng(11)
    phases = np.concatenate([[0.2], rng.uniform(-0.3, 0.3, 6)])
    g = 1.3
    got = phase_derivative(phases, prob, g)

    A = prob.A_enc.to_dense()
    want = np.zeros(7)
    for i in range(6):
        acc = 0.0
        for j in range(6):
            if A[i, j] != 0.0:
                acc += A[i, j] * math.sin(phases[j + 1] - phases[i + 1])
        acc -= prob.b_enc[i]
        acc += prob.c[i] * math.sin(phases[0] - phases[i + 1])
        want[i + 1] = g * acc
    assert got[0] == 0.0
    assert np.allclose(got, want, rtol=1e-13, atol=1e-16)
    with pytest.raises(ValueError, match="length"):
        phase_derivative(np.zeros(6), prob, g)


def test_linearized_flow_is_small_angle_limit():
    _, _, _, prob = _system(n=6, seed=8)
    rng = np.random.default_rng(2)
    for scale in (1e-3, 1e-5):
        phases = np.concatenate([[0.0], scale * rng.standard_normal(6)])
        full = phase_derivative(phases, prob, 1.0)
        lin = linearized_phase_derivative(phases, prob, 1.0)
        # sine error is cubic in the phase scale
        assert np.max(np.abs(full - lin)) < 5.0 * scale**3


def test_cavity_derivative_identity_coupling_is_stationary():
    p = CavityParams()
    rng = np.random.default_rng(3)
    state = LaserState(
        fields=rng.standard_normal(5) + 1j * rng.standard_normal(5),
        gains=rng.uniform(0.0, 0.2, 5),
    )
    d = cavity_derivative(state, np.eye(5), p)
    assert np.all(d == 0.0)
    with pytest.raises(ValueError):
        cavity_derivative(state, np.eye(4), p)


def test_step_euler_matches_manual_update():
    _, _, _, prob = _system(n=5, seed=2)
    p = CavityParams()
    state = initial_state(prob, p)
    for _ in range(3):
        state = step(state, DynamicsMode.FullField, prob, p)
    dE = field_derivative(state, prob, p)
    dG = gain_derivative(state.gains, state.fields, p)
    want_fields = state.fields + p.dt * dE
    want_gains = state.gains + p.dt * dG
    nxt = step(state, DynamicsMode.FullField, prob, p, integrator="euler")
    assert np.array_equal(nxt.fields, want_fields)
    assert np.array_equal(nxt.gains, want_gains)


def test_step_phase_only_pins_amplitudes():
    _, _, _, prob = _system(n=5, seed=4)
    p = CavityParams(D=1.25)
    state = initial_state(prob, p)
    for _ in range(50):
        state = step(state, DynamicsMode.PhaseOnly, prob, p)
    assert np.allclose(np.abs(state.fields), 1.25, rtol=1e-14)
    assert np.array_equal(state.gains, initial_state(prob, p).gains)


def test_step_rk4_converges_faster_than_euler():
    _, _, _, prob = _system(n=5, seed=6)
    coarse = CavityParams(dt=0.5)
    fine = CavityParams(dt=1e-3)

    def integrate(params, integrator, t_end=2.0):
        s = initial_state(prob, params)
        for _ in range(round(t_end / params.dt)):
            s = step(s, DynamicsMode.PhaseOnly, prob, params, integrator)
        return s.phases()

    reference = integrate(fine, "euler")
    err_euler = np.max(np.abs(integrate(coarse, "euler") - reference))
    err_rk4 = np.max(np.abs(integrate(coarse, "rk4") - reference))
    assert err_rk4 < err_euler / 10.0


def test_step_mode_and_system_validation():
    _, _, _, prob = _system(n=4)
    p = CavityParams()
    state = initial_state(prob, p)
    with pytest.raises(ValueError, match="explicit coupling"):
        step(state, DynamicsMode.GenericCavity, prob, p)
    with pytest.raises(ValueError, match="encoded problem"):
        step(state, DynamicsMode.PhaseOnly, np.eye(5), p)
    with pytest.raises(ValueError, match="lasers"):
        step(LaserState(fields=np.ones(3), gains=np.zeros(3)),
             DynamicsMode.FullField, prob, p)
    with pytest.raises(ValueError, match="integrator"):
        step(state, DynamicsMode.PhaseOnly, prob, p, integrator="verlet")


def test_generic_cavity_step_runs():
    p = CavityParams()
    rng = np.random.default_rng(9)
    state = LaserState(
        fields=rng.standard_normal(4) + 1j * rng.standard_normal(4),
        gains=np.full(4, stationary_gain(p)),
    )
    K = np.eye(4, dtype=complex)
    nxt = step(state, DynamicsMode.GenericCavity, K, p)
    assert np.array_equal(nxt.fields, state.fields)


def test_run_phase_only_converges_to_lu():
    dense, A, b, prob = _system(n=20, seed=12)
    p = CavityParams()
    result = run(prob, A, b, p, DynamicsMode.PhaseOnly, tol=1e-6)
    check_run_result(result, p)
    assert result.converged
    assert result.final_residual <= 1e-6
    assert rel_err(result.decoded_x, lu_solve(dense, b)) < 1e-5
    assert result.restarts == 0
    assert result.max_phase_seen < 0.3


def test_run_full_field_converges_to_lu():
    dense, A, b, prob = _system(n=14, seed=13)
    p = CavityParams()
    result = run(prob, A, b, p, DynamicsMode.FullField, tol=1e-6)
    check_run_result(result, p)
    assert result.converged
    assert rel_err(result.decoded_x, lu_solve(dense, b)) < 1e-5


def test_run_normal_equations_solves_nonsymmetric():
    rng = np.random.default_rng(21)
    dense = rng.standard_normal((10, 10)) * 0.3 + np.eye(10) * 3.0
    A = SparseMatrix.from_dense(dense)
    b = rng.standard_normal(10)
    prob = encode(A, b, EncodingConfig(system_mode="normal_equations"))
    result = run(prob, A, b, CavityParams(), DynamicsMode.PhaseOnly,
                 tol=1e-6, max_roundtrips=200_000)
    check_run_result(result)
    assert result.converged
    # Residual is checked against the original system, not A^T A.
    assert rel_err(result.decoded_x, lu_solve(dense, b)) < 1e-5


def test_run_rk4_integrator():
    dense, A, b, prob = _system(n=10, seed=14)
    result = run(prob, A, b, CavityParams(), DynamicsMode.PhaseOnly,
                 tol=1e-6, integrator="rk4")
    check_run_result(result)
    assert result.converged


def test_run_substep_dt():
    dense, A, b, prob = _system(n=10, seed=15)
    result = run(prob, A, b, CavityParams(dt=0.5), DynamicsMode.PhaseOnly,
                 tol=1e-6)
    check_run_result(result, CavityParams(dt=0.5))
    assert result.converged
    with pytest.raises(ValueError, match="whole number"):
        run(prob, A, b, CavityParams(dt=0.3), DynamicsMode.PhaseOnly)


def test_run_restarts_on_phase_excursion():
    dense, A, b, _ = _system(n=6, seed=16)
    x_true = lu_solve(dense, b)
    scale = 4.0 / np.max(np.abs(x_true))
    b_big = b * scale
    A_sp = SparseMatrix.from_dense(dense)
    prob = encode(A_sp, b_big, EncodingConfig(beta_init=0.25))
    # After restarts the phases settle just under theta_max, where the
    # sine distortion bounds accuracy to roughly theta^2/6, so the
    # reachable tolerance is a few percent, not the default 1e-5.
    result = run(prob, A_sp, b_big, CavityParams(), DynamicsMode.PhaseOnly,
                 tol=2e-2, check_every=20)
    check_run_result(result)
    assert result.converged
    assert result.restarts >= 1
    assert result.max_phase_seen > 0.3
    assert rel_err(result.decoded_x, x_true * scale) < 0.05


def test_run_restart_budget_exhaustion():
    dense, A, b, _ = _system(n=6, seed=16)
    x_true = lu_solve(dense, b)
    b_big = b * (4.0 / np.max(np.abs(x_true)))
    A_sp = SparseMatrix.from_dense(dense)
    prob = encode(A_sp, b_big, EncodingConfig(beta_init=0.25))
    with pytest.raises(RestartBudgetError):
        run(prob, A_sp, b_big, CavityParams(), DynamicsMode.PhaseOnly,
            tol=1e-6, check_every=20, max_restarts=0)


def test_run_roundtrip_cap_returns_nonconverged():
    dense, A, b, prob = _system(n=8, seed=17)
    p = CavityParams()
    result = run(prob, A, b, p, DynamicsMode.PhaseOnly, tol=1e-16,
                 check_every=50, max_roundtrips=200)
    check_run_result(result, p)
    assert not result.converged
    assert result.roundtrips == 200
    assert result.time_ns == 4000


def test_run_detects_divergence():
    # Unstabilized sign on an amplifying system blows the fields up.
    dense = np.eye(5) * 2.0
    A = SparseMatrix.from_dense(dense)
    b = np.ones(5)
    prob = encode(A, b, EncodingConfig(sign="as_written"))
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(DynamicsError):
            run(prob, A, b, CavityParams(), DynamicsMode.FullField,
                tol=1e-6, max_roundtrips=5000)


def test_run_rejects_generic_cavity_and_bad_args():
    dense, A, b, prob = _system(n=5, seed=18)
    p = CavityParams()
    with pytest.raises(ValueError, match="GenericCavity"):
        run(prob, A, b, p, DynamicsMode.GenericCavity)
    with pytest.raises(ValueError):
        run(prob, A, b, p, DynamicsMode.PhaseOnly, tol=0.0)
    with pytest.raises(ValueError):
        run(prob, A, b, p, DynamicsMode.PhaseOnly, check_every=0)
    with pytest.raises(ValueError):
        run(prob, A, np.ones(4), p, DynamicsMode.PhaseOnly)


def test_residual_trace_and_csv(tmp_path):
    dense, A, b, prob = _system(n=8, seed=19)
    result = run(prob, A, b, CavityParams(), DynamicsMode.PhaseOnly,
                 tol=1e-16, check_every=25, max_roundtrips=100)
    assert [rt for rt, _ in result.residual_trace] == [25, 50, 75, 100]
    path = tmp_path / "trace.csv"
    write_trace_csv(result, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "roundtrip,residual,max_phase"
    assert len(lines) == 5
    first = lines[1].split(",")
    assert int(first[0]) == 25
    assert float(first[1]) == result.residual_trace[0][1]
