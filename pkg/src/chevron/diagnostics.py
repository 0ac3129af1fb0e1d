"""Norms, energies and per-step checks of the scheme's a priori estimates.

Two norm conventions appear and are never mixed:

* raw vector norms ``sum_i |u_i|^2`` (fields ending in ``_raw``, the growth
  and energy residuals, the stabilization gain);
* ``dx``-weighted norms approximating continuum integrals (``l2_*``,
  ``h1_*``, the Lyapunov functional, the dissipative bound).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import List, Optional, Sequence

import numpy as np

from .control import ModeBasis, discrete_eigenvalues, sine_modes
from .discretization import coefficients, laplacian, system_matrices
from .errors import ConfigError
from .linalg import DirectSolver, LowRankUpdatedOperator, solve_tridiagonal
from .model import Grid1D, Parameters1D, State1D
from .stepper import Feedback

__all__ = [
    "GROWTH_TOL",
    "ENERGY_TOL",
    "DiagnosticsRecord",
    "DampingReport",
    "DissipativeReport",
    "record",
    "lyapunov",
    "damping_report",
    "verify_dissipative_bound",
    "estimate_m0",
]

GROWTH_TOL = 1e-10
ENERGY_TOL = 1e-8


@dataclass(frozen=True)
class DiagnosticsRecord:
    """Per-step diagnostics.

    ``l2_a``, ``l2_phi`` are ``sqrt(dx * sum |u_i|^2)``; ``h1_a``, ``h1_phi``
    are ``dx * u^T Lap u`` (squared gradient norms). Residuals are left minus
    right side of each inequality in raw vector norms, nonpositive up to the
    tolerances in ``GROWTH_TOL`` / ``ENERGY_TOL``; ``violations`` counts the
    inequalities that exceeded them.
    """

    step: int
    time: float
    l2_a: float
    l2_phi: float
    l2_a_raw: float
    l2_phi_raw: float
    h1_a: float
    h1_phi: float
    lyapunov: float
    growth_residual_a: float = 0.0
    growth_residual_phi: float = 0.0
    energy_residual_a: float = 0.0
    energy_residual_phi: float = 0.0
    control_energy: float = 0.0
    violations: int = 0

    @classmethod
    def columns(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> dict:
        return asdict(self)


def _abs2(u):
    return u.real**2 + u.imag**2


def _quad(lap, u):
    return lap.quadratic(u)


def lyapunov(state: State1D, params: Parameters1D, grid: Grid1D) -> float:
    """``|A_x|^2 + D1 |phi_x|^2 + |A|_4^4 / 2 + (phi^2, |A|^2) - |A|^2 + h |phi|^2``
    with gradients by summation by parts and node-sum quadrature."""
    lap = laplacian(grid)
    a, phi, dx = state.a_int, state.phi_int, grid.dx
    abs2 = _abs2(a)
    return float(
        dx * _quad(lap, a)
        + params.d1 * dx * _quad(lap, phi)
        + 0.5 * dx * np.sum(abs2**2)
        + dx * np.sum(phi**2 * abs2)
        - dx * np.sum(abs2)
        + params.h * dx * np.sum(phi**2)
    )


def _work(fb: Optional[Feedback], test, u_new) -> float:
    """``mu * Re <W^T test, W^T (u_new - target)>``, the feedback's share of the
    identity obtained by testing the scheme against ``test``."""
    if fb is None or fb.vectors.shape[1] == 0 or fb.mu == 0:
        return 0.0
    c_test = fb.coefficients(test)
    c_dev = fb.coefficients(fb.deviation(u_new))
    return float(fb.mu * np.sum(c_test.real * c_dev.real + c_test.imag * c_dev.imag))


def _residuals(prev, state, params, grid, feedback_a, feedback_phi):
    lap = laplacian(grid)
    r = grid.dt / params.tau
    dt = grid.dt
    c0 = coefficients(prev, params)
    c1 = coefficients(state, params)
    a0, a1 = prev.a_int, state.a_int
    p0, p1 = prev.phi_int, state.phi_int
    n_a0, n_a1 = float(np.sum(_abs2(a0))), float(np.sum(_abs2(a1)))
    n_p0, n_p1 = float(p0 @ p0), float(p1 @ p1)
    lap_a0, lap_a1 = _quad(lap, a0), _quad(lap, a1)
    lap_p0, lap_p1 = _quad(lap, p0), _quad(lap, p1)

    # growth estimates: tested against the new iterate, M-form of the scheme
    hm = float(np.max(c0.h_minus))
    gm = float(np.max(c0.g_minus))
    lhs = 0.5 * (1 - r * hm) * n_a1 + r * lap_a1 + r * float(np.sum(c0.h_plus * _abs2(a1)))
    lhs += r * _work(feedback_a, a1, a1)
    rhs = 0.5 * (1 + r * hm) * n_a0
    growth_a = lhs - rhs
    tol_growth_a = GROWTH_TOL * max(1.0, n_a0)

    lhs = 0.5 * (1 - dt * gm) * n_p1 + dt * params.d1 * lap_p1 + dt * float(np.sum(c0.g_plus * p1**2))
    lhs += dt * _work(feedback_phi, p1, p1)
    rhs = 0.5 * (1 + dt * gm) * n_p0
    growth_phi = lhs - rhs
    tol_growth_phi = GROWTH_TOL * max(1.0, n_p0)

    # energy-type estimates: tested against the increment, time-derivative form
    da = a1 - a0
    h0, h1 = c0.h_net, c1.h_net
    terms_l = [
        params.tau * float(np.sum(_abs2(da))) / dt,
        0.5 * lap_a1,
        0.5 * float(np.sum(h1 * _abs2(a1))),
        _work(feedback_a, da, a1),
    ]
    terms_r = [
        0.5 * dt * n_a1 * float(np.max(np.abs(h1 - h0))) / dt,
        0.5 * lap_a0,
        0.5 * float(np.sum(h0 * _abs2(a0))),
    ]
    energy_a = sum(terms_l) - sum(terms_r)
    tol_energy_a = ENERGY_TOL * (1.0 + sum(abs(t) for t in terms_l + terms_r))

    dp = p1 - p0
    g0, g1 = c0.g_net, c1.g_net
    terms_l = [
        float(dp @ dp) / dt,
        0.5 * params.d1 * lap_p1,
        0.5 * float(np.sum(g1 * p1**2)),
        _work(feedback_phi, dp, p1),
    ]
    terms_r = [
        0.5 * dt * n_p1 * float(np.max(np.abs(g1 - g0))) / dt,
        0.5 * params.d1 * lap_p0,
        0.5 * float(np.sum(g0 * p0**2)),
    ]
    energy_phi = sum(terms_l) - sum(terms_r)
    tol_energy_phi = ENERGY_TOL * (1.0 + sum(abs(t) for t in terms_l + terms_r))

    violations = int(growth_a > tol_growth_a) + int(growth_phi > tol_growth_phi)
    violations += int(energy_a > tol_energy_a) + int(energy_phi > tol_energy_phi)
    return growth_a, growth_phi, energy_a, energy_phi, violations


def record(
    state: State1D,
    prev: Optional[State1D],
    params: Parameters1D,
    grid: Grid1D,
    control_energy: float = 0.0,
    feedback_a: Optional[Feedback] = None,
    feedback_phi: Optional[Feedback] = None,
) -> DiagnosticsRecord:
    """Diagnostics of ``state``; the inequality residuals need ``prev``, the
    state one step earlier, and the feedback applied in between (if any)."""
    state.check_grid(grid)
    lap = laplacian(grid)
    dx = grid.dx
    n_a = float(np.sum(_abs2(state.a_int)))
    n_p = float(state.phi_int @ state.phi_int)
    residuals = (0.0, 0.0, 0.0, 0.0, 0)
    if prev is not None:
        if prev.step + 1 != state.step:
            raise ConfigError(f"residuals need consecutive steps, got {prev.step} and {state.step}")
        residuals = _residuals(prev, state, params, grid, feedback_a, feedback_phi)
    return DiagnosticsRecord(
        step=state.step,
        time=state.time,
        l2_a=math.sqrt(dx * n_a),
        l2_phi=math.sqrt(dx * n_p),
        l2_a_raw=math.sqrt(n_a),
        l2_phi_raw=math.sqrt(n_p),
        h1_a=dx * _quad(lap, state.a_int),
        h1_phi=dx * _quad(lap, state.phi_int),
        lyapunov=lyapunov(state, params, grid),
        growth_residual_a=residuals[0],
        growth_residual_phi=residuals[1],
        energy_residual_a=residuals[2],
        energy_residual_phi=residuals[3],
        control_energy=control_energy,
        violations=residuals[4],
    )


@dataclass(frozen=True, eq=False)
class DampingReport:
    """Per-mode amplification of the amplitude update.

    ``observed_ratio`` is ``||M^-1 L V_j||`` for the operator actually used
    (stabilized when a basis was given), ``observed_free`` the same with the
    uncontrolled ``M_A``. ``projection`` is ``||W^T V_j||^2``.
    """

    j: np.ndarray
    lambda_j: np.ndarray
    bound_free: np.ndarray
    bound_stabilized: np.ndarray
    observed_ratio: np.ndarray
    observed_free: np.ndarray
    projection: np.ndarray
    included: np.ndarray

    def rows(self):
        for idx in range(self.j.shape[0]):
            yield (
                int(self.j[idx]),
                float(self.lambda_j[idx]),
                float(self.bound_free[idx]),
                float(self.bound_stabilized[idx]),
                float(self.observed_ratio[idx]),
            )


def damping_report(
    state: State1D, params: Parameters1D, grid: Grid1D, basis: Optional[ModeBasis] = None
) -> DampingReport:
    """Compare observed one-step amplification of each discrete eigenmode with
    ``(1 + r |H_-|_inf) / (1 + r lambda_j [+ r mu |W^T V_j|^2])``, ``r = dt/tau``."""
    state.check_grid(grid)
    m = grid.n - 1
    j = np.arange(1, m + 1)
    lam = discrete_eigenvalues(grid)
    modes = sine_modes(grid, j)
    coeffs = coefficients(state, params)
    mats = system_matrices(laplacian(grid), coeffs, params, grid)
    r = grid.dt / params.tau
    hm = float(np.max(coeffs.h_minus))
    numer = 1.0 + r * hm
    bound_free = numer / (1.0 + r * lam)
    rhs = mats.l_a_diag[:, None] * modes
    observed_free = np.linalg.norm(solve_tridiagonal(mats.m_a, rhs), axis=0)
    if basis is None:
        projection = np.zeros(m)
        return DampingReport(j, lam, bound_free, bound_free.copy(), observed_free, observed_free,
                             projection, np.zeros(m, dtype=bool))
    projection = np.sum((basis.vectors.T @ modes) ** 2, axis=0)
    bound_stab = numer / (1.0 + r * lam + r * basis.mu * projection)
    op = LowRankUpdatedOperator(mats.m_a, basis.vectors, basis.mu * r)
    solver = DirectSolver()
    observed = np.empty(m)
    for col in range(m):
        x, _ = solver.solve(op, rhs[:, col])
        observed[col] = np.linalg.norm(x)
    return DampingReport(j, lam, bound_free, bound_stab, observed, observed_free,
                         projection, j <= basis.k_modes)


@dataclass(frozen=True)
class DissipativeReport:
    alpha: float
    satisfied: bool
    binding: bool
    max_ratio: float
    first_violation: Optional[float] = None

    @property
    def label(self) -> str:
        if not self.satisfied:
            return f"violated at t={self.first_violation:g}"
        return "satisfied, binding" if self.binding else "satisfied, non-binding"


def verify_dissipative_bound(
    trace: Sequence[DiagnosticsRecord], params: Parameters1D, grid: Grid1D, slack: float = 0.05
) -> DissipativeReport:
    """Check ``tau |A|^2 + |phi|^2 <= exp(-alpha t) (tau |A0|^2 + |phi0|^2) + L/alpha``
    along a free-run trace, ``alpha = min(2 pi^2 / (tau L^2) + 2 / tau, 2 pi^2 D1 / L^2)``.

    The bound holds with relative ``slack`` for discretization error. It is
    flagged binding when the trace comes within a factor 2 of it.
    """
    if not trace:
        raise ConfigError("empty trace")
    length, tau = params.length, params.tau
    alpha = min(2 * math.pi**2 / (tau * length**2) + 2 / tau, 2 * math.pi**2 * params.d1 / length**2)
    t0 = trace[0].time
    e0 = tau * trace[0].l2_a**2 + trace[0].l2_phi**2
    max_ratio = 0.0
    first = None
    for rec in trace:
        lhs = tau * rec.l2_a**2 + rec.l2_phi**2
        rhs = math.exp(-alpha * (rec.time - t0)) * e0 + length / alpha
        max_ratio = max(max_ratio, lhs / rhs)
        if first is None and lhs > (1 + slack) * rhs:
            first = rec.time
    return DissipativeReport(alpha, first is None, max_ratio > 0.5, max_ratio, first)


def estimate_m0(trace: Sequence[DiagnosticsRecord]) -> float:
    """Largest squared gradient norm (``h1_a`` or ``h1_phi``) along ``trace``."""
    if not trace:
        raise ConfigError("cannot estimate M0 from an empty trace")
    return float(max(max(rec.h1_a, rec.h1_phi) for rec in trace))
