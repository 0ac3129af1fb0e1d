import numpy as np
import pytest

from chevron import _backend, _pykernels
from chevron.control import build_mode_basis
from chevron.linalg import CGSolver, DirectSolver
from chevron.model import Grid1D, InitialSpec, Parameters1D, initial_condition
from chevron.stepper import step_free, step_stabilized

compiled = pytest.mark.skipif("compiled" not in _backend.available(), reason="extension not built")


def test_use_backend_roundtrip():
    before = _backend.current()
    prev = _backend.use_backend("python")
    assert prev == before and _backend.current() == "python"
    _backend.use_backend(prev)
    assert _backend.current() == before
    with pytest.raises(ValueError):
        _backend.use_backend("fortran")


@compiled
def test_kernel_parity(rng):
    from chevron import _kernels

    m, k = 300, 17
    diag = rng.uniform(3, 4, m)
    off = rng.uniform(-1, 1, m - 1)
    factor = np.ascontiguousarray(rng.standard_normal((m, k)))
    x = rng.standard_normal(m)
    rhs = rng.standard_normal((m, 2))
    for name in ("tridiag_matvec",):
        np.testing.assert_allclose(getattr(_kernels, name)(diag, off, x), getattr(_pykernels, name)(diag, off, x), rtol=1e-14)
    np.testing.assert_allclose(
        _kernels.lowrank_matvec(diag, off, factor, 2.0, x), _pykernels.lowrank_matvec(diag, off, factor, 2.0, x),
        rtol=1e-13, atol=1e-12,
    )
    xc, sc = _kernels.thomas(diag, off, rhs)
    xp, sp = _pykernels.thomas(diag, off, rhs)
    assert sc == sp == -1
    np.testing.assert_allclose(xc, xp, rtol=1e-13)
    a = _kernels.cg(diag, off, factor, 2.0, rhs[:, 0].copy(), 1e-12, 600)
    b = _pykernels.cg(diag, off, factor, 2.0, rhs[:, 0].copy(), 1e-12, 600)
    assert a[2] and b[2] and abs(a[1] - b[1]) <= 2
    np.testing.assert_allclose(a[0], b[0], atol=1e-10)


@compiled
@pytest.mark.parametrize("solver", [DirectSolver(), CGSolver(1e-12)], ids=["direct", "cg"])
def test_trajectory_parity(solver):
    g = Grid1D.from_length(20.0, 96, 0.1)
    p = Parameters1D(1.0, 1.0, 0.1, 20.0)
    s0 = initial_condition(InitialSpec("oscillatory", seed=1, amplitude=0.5), g)
    b = build_mode_basis(g, 12, 5.0)
    finals = []
    for name in ("compiled", "python"):
        prev = _backend.use_backend(name)
        try:
            s = s0
            for _ in range(30):
                s = step_free(s, p, g, solver).state
                s = step_stabilized(s, p, g, b, solver).state
            finals.append(s)
        finally:
            _backend.use_backend(prev)
    np.testing.assert_allclose(finals[0].a, finals[1].a, atol=1e-9)
    np.testing.assert_allclose(finals[0].phi, finals[1].phi, atol=1e-9)
