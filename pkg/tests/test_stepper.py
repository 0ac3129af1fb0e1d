import math

import numpy as np
import pytest

from chevron.control import build_mode_basis, discrete_eigenvalues, plan_zero_stabilization, sine_modes
from chevron.errors import ConfigError, SolverError
from chevron.linalg import CGSolver, DirectSolver
from chevron.model import Grid1D, InitialSpec, Parameters1D, State1D, initial_condition
from chevron.stepper import step_free, step_stabilized, step_tracking

from conftest import random_state

SOLVER = DirectSolver()


def mode_state(grid, j, amp=1e-8):
    w = sine_modes(grid, [j])[:, 0]
    return State1D.from_interior(amp * w.astype(complex), np.zeros(grid.n - 1))


@pytest.fixture
def long_grid():
    return Grid1D.from_length(100.0, 256, 0.1)


@pytest.fixture
def long_params():
    return Parameters1D(1.0, 1.0, 0.1, 100.0)


def test_zero_is_fixed_point(long_grid, long_params):
    z = State1D.zeros(long_grid)
    b = build_mode_basis(long_grid, 10, 5.0)
    assert step_free(z, long_params, long_grid, SOLVER).state.same_fields(z)
    assert step_stabilized(z, long_params, long_grid, b, SOLVER).state.same_fields(z)
    out = step_tracking(z, z, long_params, long_grid, 3.0, 3.0, 5, 5, SOLVER)
    assert out.state.same_fields(z)


def test_time_is_step_times_dt(small_grid, small_params):
    s = State1D.zeros(small_grid)
    for _ in range(7):
        s = step_free(s, small_params, small_grid, SOLVER).state
    assert s.step == 7 and s.time == 7 * small_grid.dt


def test_undamped_mode_grows(long_grid, long_params):
    lam = discrete_eigenvalues(long_grid, 1)[0]
    assert lam < 1
    out = step_free(mode_state(long_grid, 1), long_params, long_grid, SOLVER)
    ratio = np.linalg.norm(out.state.a) / 1e-8
    r = long_grid.dt / long_params.tau
    assert ratio == pytest.approx((1 + r) / (1 + r * lam), rel=1e-6)
    assert ratio > 1


def test_damped_mode_decays(long_grid, long_params):
    j = 200
    assert discrete_eigenvalues(long_grid, j)[-1] > 1
    out = step_free(mode_state(long_grid, j), long_params, long_grid, SOLVER)
    assert np.linalg.norm(out.state.a) / 1e-8 < 1


def test_mu_zero_is_free_step_bitwise(rng, small_grid, small_params):
    s = random_state(rng, small_grid)
    b = build_mode_basis(small_grid, 5, 0.0)
    a = step_free(s, small_params, small_grid, SOLVER).state
    c = step_stabilized(s, small_params, small_grid, b, SOLVER).state
    assert a.same_fields(c)


def test_stabilized_mode_bound(long_grid, long_params):
    mu = 2.0
    b = build_mode_basis(long_grid, 5, mu)
    r = long_grid.dt / long_params.tau
    for j in (1, 3, 5):
        lam = discrete_eigenvalues(long_grid, j)[-1]
        out = step_stabilized(mode_state(long_grid, j), long_params, long_grid, b, SOLVER)
        ratio = np.linalg.norm(out.state.a) / 1e-8
        assert ratio <= (1 + r) / (1 + r * lam + r * mu) * (1 + 1e-10)
        assert ratio < 1
        w = b.vectors
        expected = mu * np.sum(np.abs(w.T @ out.state.a_int) ** 2)
        assert out.control_energy == pytest.approx(expected, rel=1e-12)


def test_plan_gives_monotone_amplitude():
    g = Grid1D.from_length(30.0, 128, 0.1)
    p = Parameters1D(1.0, 1.0, 0.1, 30.0)
    s = initial_condition(InitialSpec("oscillatory", seed=4, amplitude=0.5), g)
    plan = plan_zero_stabilization(s, g)
    b = build_mode_basis(g, plan.k_modes, plan.mu)
    norm = np.linalg.norm(s.a)
    for _ in range(300):
        s = step_stabilized(s, p, g, b, SOLVER).state
        new = np.linalg.norm(s.a)
        if norm < 1e-13:
            break
        assert new < norm
        norm = new


def test_tracking_identity(rng, small_grid, small_params):
    s = random_state(rng, small_grid, 0.5)
    out = step_tracking(s, s, small_params, small_grid, 5.0, 5.0, 4, 4, SOLVER)
    ref = step_free(s, small_params, small_grid, SOLVER).state
    assert np.max(np.abs(out.state.a - ref.a)) <= 1e-12
    assert np.max(np.abs(out.state.phi - ref.phi)) <= 1e-12
    assert out.control_energy <= 1e-24


def test_tracking_zero_reference_reduces_to_stabilization(rng, small_grid, small_params):
    s = random_state(rng, small_grid, 0.5)
    z = State1D.zeros(small_grid)
    b = build_mode_basis(small_grid, 6, 4.0)
    tracked = step_tracking(s, z, small_params, small_grid, 4.0, 0.0, 6, 3, SOLVER).state
    stab = step_stabilized(s, small_params, small_grid, b, SOLVER).state
    np.testing.assert_allclose(tracked.a, stab.a, atol=1e-11)
    np.testing.assert_allclose(tracked.phi, stab.phi, atol=1e-14)


def test_tracking_reduces_error(rng, small_grid, small_params):
    ref = random_state(rng, small_grid, 0.5)
    ctrl = random_state(rng, small_grid, 0.5)
    e0 = np.linalg.norm(ctrl.a - ref.a) ** 2 + np.linalg.norm(ctrl.phi - ref.phi) ** 2
    for _ in range(40):
        ref_next = step_free(ref, small_params, small_grid, SOLVER).state
        ctrl = step_tracking(ctrl, ref, small_params, small_grid, 40.0, 40.0, 31, 31, SOLVER, ref_next).state
        ref = ref_next
    e1 = np.linalg.norm(ctrl.a - ref.a) ** 2 + np.linalg.norm(ctrl.phi - ref.phi) ** 2
    assert e1 < 1e-10 * e0


def test_tracking_errors(small_grid, small_params):
    z = State1D.zeros(small_grid)
    later = State1D(z.a, z.phi, time=small_grid.dt, step=1)
    with pytest.raises(ConfigError, match="reference"):
        step_tracking(z, later, small_params, small_grid, 1, 1, 1, 1, SOLVER)
    with pytest.raises(ConfigError):
        step_tracking(z, z, small_params, small_grid, 1, 1, 99, 1, SOLVER)
    with pytest.raises(ConfigError):
        step_tracking(z, z, small_params, small_grid, 1, 1, 1, 1, SOLVER, reference_next=z)


def test_solver_failure_carries_step(rng, small_grid, small_params):
    s = random_state(rng, small_grid)
    s = State1D(s.a, s.phi, time=small_grid.dt * 4, step=4)
    with pytest.raises(SolverError, match="step 4"):
        step_free(s, small_params, small_grid, CGSolver(tol=1e-15, max_iter=1))


def test_cg_and_direct_step_agree(rng, small_grid, small_params):
    s = random_state(rng, small_grid)
    a = step_free(s, small_params, small_grid, SOLVER).state
    c = step_free(s, small_params, small_grid, CGSolver(1e-10)).state
    assert np.max(np.abs(a.a - c.a)) < 1e-8 and np.max(np.abs(a.phi - c.phi)) < 1e-8
