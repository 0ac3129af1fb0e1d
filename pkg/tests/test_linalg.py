import numpy as np
import pytest

from chevron.discretization import TridiagonalOperator, coefficients, laplacian, system_matrices
from chevron.errors import CGNonConvergence, ConfigError, SolverError
from chevron.linalg import (
    CGSolver,
    DirectSolver,
    LowRankUpdatedOperator,
    make_solver,
    solve_cg,
    solve_tridiagonal,
)
from chevron.model import SolverSpec

from conftest import random_state


def random_spd(rng, m):
    off = rng.uniform(-1, 1, m - 1)
    pad = np.abs(np.concatenate([[0], off])) + np.abs(np.concatenate([off, [0]]))
    return TridiagonalOperator(pad + rng.uniform(0.01, 2, m), off)


def test_thomas_small(backend):
    x = solve_tridiagonal(TridiagonalOperator([2.0, 2.0], [-1.0]), [1.0, 1.0])
    np.testing.assert_allclose(x, [1, 1], rtol=1e-15)
    r = np.arange(5.0)
    np.testing.assert_array_equal(solve_tridiagonal(TridiagonalOperator(np.ones(5), np.zeros(4)), r), r)


def test_thomas_residual_and_blocks(rng, backend):
    op = random_spd(rng, 100)
    rhs = rng.standard_normal((100, 3))
    x = solve_tridiagonal(op, rhs)
    for c in range(3):
        res = np.linalg.norm(op @ x[:, c] - rhs[:, c])
        assert res <= 1e-12 * np.linalg.norm(rhs[:, c])


def test_thomas_bad_pivot(backend):
    with pytest.raises(SolverError, match="pivot"):
        solve_tridiagonal(TridiagonalOperator([0.0, 1.0], [0.0]), [1.0, 1.0])
    with pytest.raises(ConfigError):
        solve_tridiagonal(TridiagonalOperator([1.0, 1.0], [0.0]), [1.0, 1.0, 1.0])


def test_cg_identity(backend):
    r = np.array([1.0, -2.0, 3.0])
    x, it = solve_cg(TridiagonalOperator(np.ones(3), np.zeros(2)), r, tol=1e-10)
    np.testing.assert_allclose(x, r)
    assert it <= 1
    x, it = solve_cg(lambda v: v, r)
    assert it <= 1


def test_cg_zero_rhs(backend):
    x, it = solve_cg(TridiagonalOperator(np.ones(4), np.zeros(3)), np.zeros(4))
    assert it == 0 and not np.any(x)


def test_cg_matches_direct_on_scheme_matrix(rng, small_grid, small_params):
    s = random_state(rng, small_grid)
    mats = system_matrices(laplacian(small_grid), coefficients(s, small_params), small_params, small_grid)
    rhs = rng.standard_normal(small_grid.n - 1)
    x_cg, _ = solve_cg(mats.m_a, rhs, tol=1e-10)
    x_d = solve_tridiagonal(mats.m_a, rhs)
    assert np.max(np.abs(x_cg - x_d)) <= 1e-8


def test_cross_solver_agreement_random(backend):
    rng = np.random.default_rng(2024)
    for _ in range(100):
        m = int(rng.integers(2, 1001))
        op = random_spd(rng, m)
        rhs = rng.standard_normal(m)
        x_d = solve_tridiagonal(op, rhs)
        x_cg, it = solve_cg(op, rhs, tol=1e-10)
        assert it <= 2 * m
        assert np.max(np.abs(x_cg - x_d)) <= 1e-8 * np.max(np.abs(x_d))


def test_lowrank_apply_matches_dense(backend):
    rng = np.random.default_rng(5)
    for m in (1, 2, 7, 33, 64):
        base = random_spd(rng, m) if m > 1 else TridiagonalOperator([2.0], [])
        k = int(rng.integers(0, m + 1))
        op = LowRankUpdatedOperator(base, rng.standard_normal((m, k)), float(rng.uniform(0, 5)))
        x = rng.standard_normal(m)
        np.testing.assert_allclose(op @ x, op.to_dense() @ x, rtol=0, atol=1e-12 * max(1, np.abs(op.to_dense() @ x).max()))


def test_lowrank_validation():
    base = TridiagonalOperator(np.ones(4), np.zeros(3))
    with pytest.raises(ConfigError):
        LowRankUpdatedOperator(base, np.ones((3, 2)), 1.0)
    with pytest.raises(ConfigError):
        LowRankUpdatedOperator(base, np.ones((4, 2)), -1.0)
    assert LowRankUpdatedOperator(base, np.ones(4), 1.0).rank == 1


def test_lowrank_zero_scale_same_as_base(rng, backend):
    base = random_spd(rng, 50)
    rhs = rng.standard_normal(50)
    op = LowRankUpdatedOperator(base, rng.standard_normal((50, 5)), 0.0)
    x1, i1 = solve_cg(op, rhs)
    x2, i2 = solve_cg(base, rhs)
    assert i1 == i2
    np.testing.assert_array_equal(x1, x2)


def test_lowrank_cg_converges(rng, backend):
    base = random_spd(rng, 200)
    q, _ = np.linalg.qr(rng.standard_normal((200, 20)))
    op = LowRankUpdatedOperator(base, q, 30.0)
    rhs = rng.standard_normal(200)
    x, it = solve_cg(op, rhs, tol=1e-10)
    assert it <= 400
    assert np.linalg.norm(op.to_dense() @ x - rhs) <= 1e-10 * np.linalg.norm(rhs) * 1.0001


def test_cg_nonconvergence_carries_iterate(rng):
    op = random_spd(rng, 300)
    rhs = rng.standard_normal(300)
    with pytest.raises(CGNonConvergence) as info:
        solve_cg(op, rhs, tol=1e-14, max_iter=2)
    assert info.value.iterations == 2
    assert info.value.solution.shape == (300,) and info.value.residual > 0
    assert isinstance(info.value, SolverError) and info.value.exit_code == 3


def test_solvers_complex(rng):
    op = random_spd(rng, 40)
    rhs = rng.standard_normal(40) + 1j * rng.standard_normal(40)
    xd, _ = DirectSolver().solve_complex(op, rhs)
    xc, its = CGSolver(1e-12).solve_complex(op, rhs)
    np.testing.assert_allclose(op.matvec(xd), rhs, atol=1e-12)
    assert np.max(np.abs(xd - xc)) < 1e-9 and min(its) > 0
    low = LowRankUpdatedOperator(op, rng.standard_normal((40, 3)), 2.0)
    xl, _ = DirectSolver().solve_complex(low, rhs)
    np.testing.assert_allclose(low.to_dense() @ xl, rhs, atol=1e-10)


def test_make_solver():
    assert isinstance(make_solver(SolverSpec("direct")), DirectSolver)
    s = make_solver(SolverSpec("cg", tol=1e-7, max_iter=9))
    assert isinstance(s, CGSolver) and s.tol == 1e-7 and s.max_iter == 9
