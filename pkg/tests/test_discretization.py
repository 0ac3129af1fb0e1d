import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chevron.discretization import TridiagonalOperator, coefficients, laplacian, system_matrices
from chevron.errors import ConfigError
from chevron.model import Grid1D, Parameters1D, State1D

from conftest import random_state


def test_laplacian_entries():
    lap = laplacian(Grid1D(n=4, dx=1.0, dt=0.1))
    assert lap.diag.tolist() == [2, 2, 2] and lap.off.tolist() == [-1, -1]
    lap = laplacian(Grid1D(n=3, dx=0.5, dt=0.1))
    assert lap.diag.tolist() == [8, 8] and lap.off.tolist() == [-4]


@pytest.mark.parametrize("n,dx", [(4, 1.0), (17, 0.3), (100, 0.01)])
def test_boundary_leakage(n, dx):
    lap = laplacian(Grid1D(n=n, dx=dx, dt=0.1))
    out = lap.matvec(np.ones(n - 1))
    assert out[0] == pytest.approx(1 / dx**2, rel=1e-12)
    assert out[-1] == pytest.approx(1 / dx**2, rel=1e-12)


def test_operator_validation_and_dense():
    with pytest.raises(ConfigError):
        TridiagonalOperator(np.ones(3), np.ones(3))
    op = TridiagonalOperator([2.0, 3.0, 4.0], [-1.0, 0.5])
    dense = op.to_dense()
    x = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(op @ x, dense @ x, rtol=1e-15)
    z = x + 1j * x[::-1]
    np.testing.assert_allclose(op.matvec(z), dense @ z, rtol=1e-15)
    assert op.quadratic(z) == pytest.approx(np.real(np.conj(z) @ dense @ z), rel=1e-14)


def test_coefficients_zero_state():
    g = Grid1D(n=6, dx=1.0, dt=0.1)
    c = coefficients(State1D.zeros(g), Parameters1D(h=0.3, length=6.0))
    assert not np.any(c.h_plus) and np.all(c.h_minus == 1)
    assert np.all(c.g_plus == 0.3) and not np.any(c.g_minus)


def test_coefficients_single_node():
    a = np.zeros(5, dtype=complex)
    phi = np.zeros(5)
    a[2], phi[2] = 1.0, 2.0
    c = coefficients(State1D(a, phi), Parameters1D(length=4.0))
    assert c.h_plus[1] == 5.0 and c.g_minus[1] == 1.0


def test_coefficient_identities(rng, small_grid, small_params):
    s = random_state(rng, small_grid)
    c = coefficients(s, small_params)
    abs2 = np.abs(s.a_int) ** 2
    assert np.max(c.h_minus) == 1.0
    np.testing.assert_allclose(c.h_net + 1 - abs2 - s.phi_int**2, 0, atol=1e-14)
    np.testing.assert_allclose(c.g_net, small_params.h - abs2, atol=1e-14)
    c2 = coefficients(s, small_params)
    assert np.array_equal(c.h_plus, c2.h_plus) and np.array_equal(c.g_minus, c2.g_minus)


def test_system_matrices_zero_state():
    g = Grid1D(n=5, dx=1.0, dt=0.1)
    p = Parameters1D(tau=1.0, h=0.0, length=5.0)
    mats = system_matrices(laplacian(g), coefficients(State1D.zeros(g), p), p, g)
    np.testing.assert_allclose(mats.m_a.diag, 1.2, rtol=1e-15)
    np.testing.assert_allclose(mats.m_a.off, -0.1, rtol=1e-15)
    np.testing.assert_allclose(mats.l_a_diag, 1.1, rtol=1e-15)
    lap = laplacian(g)
    np.testing.assert_allclose(mats.m_phi.to_dense(), np.eye(4) + 0.1 * lap.to_dense(), rtol=1e-15)
    assert np.all(mats.l_phi_diag == 1.0)


def test_system_matrices_formula(rng, small_grid, small_params):
    s = random_state(rng, small_grid)
    p, g = small_params, small_grid
    c = coefficients(s, p)
    mats = system_matrices(laplacian(g), c, p, g)
    lap = laplacian(g).to_dense()
    r = g.dt / p.tau
    np.testing.assert_allclose(mats.m_a.to_dense(), np.eye(31) + r * lap + r * np.diag(c.h_plus), rtol=1e-14)
    np.testing.assert_allclose(
        mats.m_phi.to_dense(), np.eye(31) + g.dt * p.d1 * lap + g.dt * np.diag(c.g_plus), rtol=1e-14
    )
    assert np.linalg.eigvalsh(mats.m_a.to_dense()).min() >= 1 - 1e-12


@settings(max_examples=60, deadline=None)
@given(
    tau=st.floats(0.05, 10),
    d1=st.floats(0.05, 10),
    h=st.floats(0, 5),
    n=st.integers(3, 40),
    dt=st.floats(1e-4, 10),
    scale=st.floats(0, 3),
    seed=st.integers(0, 2**31),
)
def test_quadratic_forms_dominate_identity(tau, d1, h, n, dt, scale, seed):
    g = Grid1D.from_length(5.0, n, dt)
    p = Parameters1D(tau, d1, h, 5.0)
    r = np.random.default_rng(seed)
    s = random_state(r, g, scale)
    mats = system_matrices(laplacian(g), coefficients(s, p), p, g)
    for _ in range(3):
        x = r.standard_normal(n - 1)
        nx = x @ x
        assert mats.m_a.quadratic(x) >= nx * (1 - 1e-12)
        assert mats.m_phi.quadratic(x) >= nx * (1 - 1e-12)
