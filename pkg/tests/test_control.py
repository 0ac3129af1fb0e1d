import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chevron.control import (
    build_mode_basis,
    check_tracking_conditions,
    continuum_eigenvalue,
    damping_margin,
    discrete_eigenvalues,
    mode_count_2d,
    plan_zero_stabilization,
    sine_modes,
)
from chevron.discretization import laplacian
from chevron.errors import ConfigError
from chevron.model import Grid1D, InitialSpec, Parameters1D, Parameters2D, State1D, initial_condition


def brute_mode_count(c1, c2, lx, ly, max_index=40):
    delta0 = 2 * (1 - c1) / (2 + c2)
    lam = sorted(math.pi**2 * (m * m / lx**2 + k * k / ly**2)
                 for m, k in itertools.product(range(1, max_index + 1), repeat=2))
    # smallest N with lambda_{N+1} > 1/delta0
    for n, value in enumerate(lam):
        if 1 / value < delta0:
            return n
    raise AssertionError("window too small")


def test_basis_n4_eigenpair():
    g = Grid1D(n=4, dx=1.0, dt=0.1)
    b = build_mode_basis(g, 1, 1.0)
    np.testing.assert_allclose(b.vectors[:, 0], [0.5, math.sqrt(0.5), 0.5], atol=1e-15)
    assert b.eigenvalues[0] == pytest.approx(2 - math.sqrt(2), abs=1e-14)


def test_basis_orthonormal_eigenvectors():
    g = Grid1D.from_length(7.0, 64, 0.1)
    b = build_mode_basis(g, 63, 2.0)
    np.testing.assert_allclose(b.vectors.T @ b.vectors, np.eye(63), atol=1e-12)
    lap = laplacian(g)
    for j in range(63):
        w = b.vectors[:, j]
        assert np.linalg.norm(lap @ w - b.eigenvalues[j] * w) <= 1e-10
    dense = np.linalg.eigvalsh(lap.to_dense())
    np.testing.assert_allclose(b.eigenvalues, dense, rtol=1e-10)


def test_basis_range():
    g = Grid1D(n=8, dx=1.0, dt=0.1)
    for k in (0, 8):
        with pytest.raises(ConfigError):
            build_mode_basis(g, k, 1.0)
    with pytest.raises(ConfigError):
        build_mode_basis(g, 2, -1.0)
    assert build_mode_basis(g, 2, 0.0).mu == 0.0


def test_discrete_below_continuum_and_fine_grid():
    L = 1.0
    g = Grid1D.from_length(L, 2**14, 1e-3)
    lam = discrete_eigenvalues(g, 1)[0]
    assert abs(lam - math.pi**2) / math.pi**2 < 1e-6
    g = Grid1D.from_length(100.0, 512, 0.1)
    j = np.arange(1, 512)
    assert np.all(discrete_eigenvalues(g) < continuum_eigenvalue(j, 100.0))


def test_project_complex():
    g = Grid1D(n=8, dx=1.0, dt=0.1)
    b = build_mode_basis(g, 3, 1.0)
    w = sine_modes(g, [2])[:, 0]
    np.testing.assert_allclose(b.project((1 + 2j) * w), [0, 1 + 2j, 0], atol=1e-14)


def test_plan_zero_data():
    g = Grid1D.from_length(10.0, 64, 0.1)
    plan = plan_zero_stabilization(State1D.zeros(g), g)
    assert plan.mu == 1.0 and plan.threshold == 1.0
    assert plan.formula_k_modes == math.ceil(10 / math.pi) + 1 == 5
    assert plan.k_modes >= plan.coverage_k_modes and plan.satisfied


def test_plan_formula_l100():
    g = Grid1D.from_length(100.0, 512, 0.1)
    a = np.zeros(513, dtype=complex)
    a[1:-1] = math.sqrt(1.0 / 511)
    plan = plan_zero_stabilization(State1D(a, np.zeros(513)), g)
    assert plan.mu == pytest.approx(1.0)
    assert plan.formula_k_modes == 33


def test_plan_default_initial_condition():
    g = Grid1D.from_length(100.0, 512, 0.1)
    s = initial_condition(InitialSpec("oscillatory", seed=0, amplitude=0.25), g)
    plan = plan_zero_stabilization(s, g)
    assert plan.initial_norm2 == pytest.approx(21, rel=0.01)
    assert plan.formula_k_modes == 147
    eig = np.linalg.eigvalsh(laplacian(g).to_dense())
    assert np.count_nonzero(eig <= plan.threshold) <= plan.k_modes
    assert plan.satisfied


def test_plan_clamped():
    g = Grid1D.from_length(100.0, 16, 0.1)
    a = np.zeros(17, dtype=complex)
    a[1:-1] = 10
    plan = plan_zero_stabilization(State1D(a, np.zeros(17)), g)
    assert plan.clamped and plan.k_modes == 15


def test_damping_margin():
    eig = np.array([0.5, 2.0, 3.0])
    assert damping_margin(0.0, 0, eig) == pytest.approx(-0.5)
    assert damping_margin(1.0, 1, eig) == pytest.approx(0.5)


@pytest.mark.parametrize("c1,c2,expected", [(0.5, 1.0, 1), (0.0, 0.0, 0)])
def test_mode_count_2d_examples(c1, c2, expected):
    n, delta0, lam = mode_count_2d(Parameters2D(c1=c1, c2=c2), 20)
    assert n == expected == brute_mode_count(c1, c2, math.pi, math.pi)
    assert delta0 == pytest.approx(2 * (1 - c1) / (2 + c2))
    assert lam[:4] == pytest.approx([2, 5, 5, 8])


def test_mode_count_2d_degenerate():
    with pytest.raises(ConfigError, match="max_index"):
        mode_count_2d(Parameters2D(c1=0.999, c2=0.0), 10)
    with pytest.raises(ConfigError, match="c1 < 1"):
        mode_count_2d(Parameters2D(c1=3.0, c2=1.0), 10)


@settings(max_examples=40, deadline=None)
@given(
    c1a=st.floats(0, 0.95),
    c1b=st.floats(0, 0.95),
    c2=st.floats(0, 3),
    lx=st.floats(1, 6),
    ly=st.floats(1, 6),
)
def test_mode_count_2d_monotone_and_oracle(c1a, c1b, c2, lx, ly):
    lo, hi = sorted((c1a, c1b))
    n_lo, _, _ = mode_count_2d(Parameters2D(c1=lo, c2=c2, lx=lx, ly=ly), 60)
    n_hi, _, _ = mode_count_2d(Parameters2D(c1=hi, c2=c2, lx=lx, ly=ly), 60)
    assert n_hi >= n_lo
    assert n_lo == brute_mode_count(lo, c2, lx, ly, 60)


def test_tracking_conditions_examples():
    r = check_tracking_conditions(1.0, Parameters1D(d1=1.0, h=0.0, length=math.pi), 7.0, 6.0, 3, 3)
    assert (r.n1_min, r.n2_min, r.mu1_min, r.mu2_min) == (3, 3, 7.0, 6.0)
    assert r.passed and r.status == "pass"
    r = check_tracking_conditions(1.0, Parameters1D(d1=1.0, h=0.0, length=math.pi), 6.9, 6.0, 2, 3)
    assert not r.n1_ok and not r.mu1_ok and r.status == "conditions unmet"
    assert len(r.lines()) == 4


def test_tracking_conditions_zero_m0():
    r = check_tracking_conditions(0.0, Parameters1D(h=0.0, length=math.pi), 1.0, 0.0, 1, 0)
    assert r.passed
    assert r.mu1_min == 1.0 and r.mu2_min == 0.0 and r.n2_min == 0
    # lambda_{N1+1} >= 2 needs N1 + 1 >= 2
    assert r.n1_min == 1
    with pytest.raises(ConfigError):
        check_tracking_conditions(-1.0, Parameters1D(), 1, 1, 1, 1)
