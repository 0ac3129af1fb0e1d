"""One step of the semi-implicit scheme: free, zero-stabilized, and tracking.

Nonlinear coefficients are lagged at step ``k``; diffusion, the nonnegative
reaction parts and every feedback term are implicit at step ``k + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from .control import ModeBasis, sine_modes
from .discretization import coefficients, laplacian, system_matrices
from .errors import ConfigError, SolverError
from .linalg import LowRankUpdatedOperator
from .model import Grid1D, Parameters1D, State1D

__all__ = ["Feedback", "StepOutcome", "step_free", "step_stabilized", "step_tracking"]


@dataclass(frozen=True, eq=False)
class Feedback:
    """Implicit feedback ``mu * W W^T (u - target)`` applied in one equation.

    ``target`` is the interior reference at step ``k + 1``; ``None`` means zero.
    """

    vectors: np.ndarray
    mu: float
    target: Optional[np.ndarray] = None

    def deviation(self, u):
        return u if self.target is None else u - self.target

    def coefficients(self, u) -> np.ndarray:
        u = np.asarray(u)
        if np.iscomplexobj(u):
            return self.vectors.T @ u.real + 1j * (self.vectors.T @ u.imag)
        return self.vectors.T @ u

    def energy(self, u_new) -> float:
        c = self.coefficients(self.deviation(u_new))
        return float(self.mu * np.sum(c.real**2 + c.imag**2))


@dataclass(frozen=True, eq=False)
class StepOutcome:
    state: State1D
    solver_iterations: Tuple[int, int, int]
    control_energy: float = 0.0
    feedback_a: Optional[Feedback] = None
    feedback_phi: Optional[Feedback] = None


@lru_cache(maxsize=32)
def _modes(n: int, count: int) -> np.ndarray:
    grid = Grid1D(n=n, dx=1.0, dt=1.0)
    w = np.ascontiguousarray(sine_modes(grid, np.arange(1, count + 1)))
    w.flags.writeable = False
    return w


def _next_state(state, grid, a_int, phi_int):
    k = state.step + 1
    return State1D.from_interior(a_int, phi_int, time=k * grid.dt, step=k)


def _solve(step, func, *args):
    try:
        return func(*args)
    except SolverError as exc:
        if exc.step is None:
            exc.step = step
            exc.args = (f"step {step}: {exc.args[0]}",)
        raise


def step_free(state: State1D, params: Parameters1D, grid: Grid1D, solver) -> StepOutcome:
    """Advance ``M_A A' = L_A A`` and ``M_phi phi' = L_phi phi`` by one step."""
    state.check_grid(grid)
    mats = system_matrices(laplacian(grid), coefficients(state, params), params, grid)
    k = state.step
    a_new, (ir, ii) = _solve(k, solver.solve_complex, mats.m_a, mats.l_a_diag * state.a_int)
    phi_new, ip = _solve(k, solver.solve, mats.m_phi, mats.l_phi_diag * state.phi_int)
    return StepOutcome(_next_state(state, grid, a_new, phi_new), (ir, ii, ip))


def step_stabilized(
    state: State1D, params: Parameters1D, grid: Grid1D, basis: ModeBasis, solver
) -> StepOutcome:
    """Free step with the amplitude solve replaced by
    ``(M_A + (mu dt / tau) W W^T) A' = L_A A``; the director is uncontrolled."""
    state.check_grid(grid)
    if basis.vectors.shape[0] != grid.n - 1:
        raise ConfigError(f"mode basis has {basis.vectors.shape[0]} rows, grid has {grid.n - 1} interior nodes")
    mats = system_matrices(laplacian(grid), coefficients(state, params), params, grid)
    op = LowRankUpdatedOperator(mats.m_a, basis.vectors, basis.mu * grid.dt / params.tau)
    k = state.step
    a_new, (ir, ii) = _solve(k, solver.solve_complex, op, mats.l_a_diag * state.a_int)
    phi_new, ip = _solve(k, solver.solve, mats.m_phi, mats.l_phi_diag * state.phi_int)
    fb = Feedback(basis.vectors, basis.mu)
    return StepOutcome(
        _next_state(state, grid, a_new, phi_new),
        (ir, ii, ip),
        control_energy=fb.energy(a_new),
        feedback_a=fb,
    )


def step_tracking(
    controlled: State1D,
    reference: State1D,
    params: Parameters1D,
    grid: Grid1D,
    mu1: float,
    mu2: float,
    n1: int,
    n2: int,
    solver,
    reference_next: Optional[State1D] = None,
) -> StepOutcome:
    """Advance a controlled run that is pulled toward ``reference``.

    The feedback ``mu1 W1 W1^T (A~' - A_ref')`` (first ``n1`` modes) and
    ``mu2 W2 W2^T (phi~' - phi_ref')`` (first ``n2`` modes) is implicit; the
    reference at step ``k + 1`` comes from ``reference_next`` or, if omitted,
    one free step of ``reference`` with the same solver. The unknown solved
    for is the deviation ``A~' - A_ref'``, which keeps a controlled run that
    coincides with the reference on it to round-off.
    """
    controlled.check_grid(grid)
    reference.check_grid(grid)
    if controlled.step != reference.step or controlled.time != reference.time:
        raise ConfigError(
            f"controlled run at step {controlled.step} (t={controlled.time}), "
            f"reference at step {reference.step} (t={reference.time})"
        )
    m = grid.n - 1
    if not (0 <= n1 <= m and 0 <= n2 <= m):
        raise ConfigError(f"n1, n2 must lie in [0, {m}], got {n1}, {n2}")
    if reference_next is None:
        reference_next = step_free(reference, params, grid, solver).state
    elif reference_next.step != reference.step + 1:
        raise ConfigError(f"reference_next is at step {reference_next.step}, expected {reference.step + 1}")

    mats = system_matrices(laplacian(grid), coefficients(controlled, params), params, grid)
    w1 = _modes(grid.n, n1) if n1 else np.empty((m, 0))
    w2 = _modes(grid.n, n2) if n2 else np.empty((m, 0))
    op_a = LowRankUpdatedOperator(mats.m_a, w1, mu1 * grid.dt / params.tau)
    op_phi = LowRankUpdatedOperator(mats.m_phi, w2, mu2 * grid.dt)
    a_ref = reference_next.a_int
    phi_ref = reference_next.phi_int
    rhs_a = mats.l_a_diag * controlled.a_int - mats.m_a.matvec(a_ref)
    rhs_phi = mats.l_phi_diag * controlled.phi_int - mats.m_phi.matvec(phi_ref)
    k = controlled.step
    ea, (ir, ii) = _solve(k, solver.solve_complex, op_a, rhs_a)
    ep, ip = _solve(k, solver.solve, op_phi, rhs_phi)
    fb_a = Feedback(w1, mu1, a_ref)
    fb_phi = Feedback(w2, mu2, phi_ref)
    a_new = a_ref + ea
    phi_new = phi_ref + ep
    return StepOutcome(
        _next_state(controlled, grid, a_new, phi_new),
        (ir, ii, ip),
        control_energy=fb_a.energy(a_new) + fb_phi.energy(phi_new),
        feedback_a=fb_a,
        feedback_phi=fb_phi,
    )
