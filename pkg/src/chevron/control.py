"""Feedback mode bases and the prescriptions for how many modes and how much gain.

Mode vectors are the discrete Dirichlet sine modes ``sin(j pi i / n)``,
which are exact eigenvectors of the discrete Laplacian. Damping checks use
the discrete eigenvalues ``4 sin^2(j pi / 2n) / dx^2``; the mode-count
formulas use the continuum eigenvalues ``(j pi / L)^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .errors import ConfigError
from .model import Grid1D, Parameters1D, Parameters2D, State1D

__all__ = [
    "ModeBasis",
    "StabilizationPlan",
    "TrackingReport",
    "discrete_eigenvalues",
    "continuum_eigenvalue",
    "sine_modes",
    "build_mode_basis",
    "plan_zero_stabilization",
    "mode_count_2d",
    "check_tracking_conditions",
    "damping_margin",
]


def discrete_eigenvalues(grid: Grid1D, count: int | None = None) -> np.ndarray:
    """Eigenvalues ``lambda_1 < ... < lambda_count`` of the discrete Laplacian."""
    count = grid.n - 1 if count is None else count
    j = np.arange(1, count + 1)
    # 2 - 2 cos(theta) written as 4 sin^2(theta/2) to avoid cancellation
    return 4.0 * np.sin(j * math.pi / (2 * grid.n)) ** 2 / grid.dx**2


def continuum_eigenvalue(j, length: float):
    return (np.asarray(j) * math.pi / length) ** 2


def sine_modes(grid: Grid1D, indices) -> np.ndarray:
    """Unit-norm interior samples of ``sin(j pi x / L)``, one column per index."""
    i = np.arange(1, grid.n)[:, None]
    j = np.asarray(indices, dtype=np.float64)[None, :]
    v = np.sin(math.pi * i * j / grid.n)
    return v / np.linalg.norm(v, axis=0)


@dataclass(frozen=True, eq=False)
class ModeBasis:
    vectors: np.ndarray
    mu: float
    eigenvalues: np.ndarray

    @property
    def k_modes(self) -> int:
        return self.vectors.shape[1]

    def project(self, u) -> np.ndarray:
        """Coefficients ``W^T u`` of an interior vector (complex allowed)."""
        u = np.asarray(u)
        if np.iscomplexobj(u):
            return self.vectors.T @ u.real + 1j * (self.vectors.T @ u.imag)
        return self.vectors.T @ u


def build_mode_basis(grid: Grid1D, k_modes: int, mu: float) -> ModeBasis:
    """First ``k_modes`` discrete sine modes with feedback gain ``mu``.

    ``mu = 0`` is accepted; the resulting feedback is inert.
    """
    if not 1 <= k_modes <= grid.n - 1:
        raise ConfigError(f"k_modes must lie in [1, {grid.n - 1}], got {k_modes}")
    if not mu >= 0:
        raise ConfigError(f"mu must be >= 0, got {mu}")
    j = np.arange(1, k_modes + 1)
    return ModeBasis(
        vectors=np.ascontiguousarray(sine_modes(grid, j)),
        mu=float(mu),
        eigenvalues=discrete_eigenvalues(grid, k_modes),
    )


@dataclass(frozen=True)
class StabilizationPlan:
    """Gain and mode count for driving the amplitude to zero.

    ``k_modes`` is what gets applied. It covers every discrete eigenvalue up
    to ``threshold``; ``formula_k_modes`` is the continuum count
    ``ceil(sqrt(mu) L / pi) + 1`` it starts from. ``violations`` lists
    ``(j, lambda_j)`` for modes that still miss ``threshold + epsilon``.
    """

    mu: float
    k_modes: int
    epsilon: float
    threshold: float
    formula_k_modes: int
    coverage_k_modes: int
    clamped: bool = False
    violations: Tuple[Tuple[int, float], ...] = field(default_factory=tuple)
    initial_norm2: float = 0.0

    @property
    def satisfied(self) -> bool:
        return not self.violations


def damping_margin(mu: float, k_modes: int, eigenvalues) -> float:
    """``min_j (lambda_j + mu [j <= K]) - 1``; positive means every mode of
    the amplitude contracts at every step (the explicit coefficient is 1)."""
    eig = np.asarray(eigenvalues, dtype=np.float64)
    shifted = eig + mu * (np.arange(1, eig.shape[0] + 1) <= k_modes)
    return float(shifted.min() - 1.0)


def plan_zero_stabilization(a0: State1D, grid: Grid1D, epsilon: float = 1e-6) -> StabilizationPlan:
    """Gain ``mu = max(1, ||A0||^2)`` and the modes needed to damp everything.

    ``||A0||`` is the raw vector norm ``sum |A_i|^2`` (no ``dx`` factor).
    """
    if not epsilon > 0:
        raise ConfigError(f"epsilon must be > 0, got {epsilon}")
    a0.check_grid(grid)
    norm2 = float(np.sum(a0.a.real**2 + a0.a.imag**2))
    mu = max(1.0, norm2)
    threshold = mu
    m = grid.n - 1
    formula = math.ceil(math.sqrt(mu) * grid.length / math.pi) + 1
    eig = discrete_eigenvalues(grid)
    coverage = int(np.count_nonzero(eig <= threshold))
    wanted = max(formula, coverage)
    k_modes = min(wanted, m)
    included = np.arange(1, m + 1) <= k_modes
    below = eig <= threshold
    bad = below & (eig + mu * included < threshold + epsilon)
    violations = tuple((int(j), float(eig[j - 1])) for j in np.flatnonzero(bad) + 1)
    return StabilizationPlan(
        mu=mu,
        k_modes=k_modes,
        epsilon=epsilon,
        threshold=threshold,
        formula_k_modes=formula,
        coverage_k_modes=coverage,
        clamped=wanted > m,
        violations=violations,
        initial_norm2=norm2,
    )


def mode_count_2d(params: Parameters2D, max_index: int) -> Tuple[int, float, np.ndarray]:
    """Smallest ``N`` with ``1 / lambda_{N+1} < delta0`` on the rectangle.

    ``delta0 = 2 (1 - c1) / (2 + c2)``; eigenvalues are
    ``pi^2 (m^2 / lx^2 + n^2 / ly^2)`` for ``1 <= m, n <= max_index``,
    sorted with multiplicity.

    Raises
    ------
    ConfigError
        If ``c1 >= 1`` or the enumeration cannot certify ``N`` (some
        eigenvalue outside the enumerated window could still be
        ``<= 1 / delta0``).
    """
    if not params.c1 < 1:
        raise ConfigError(f"mode count needs c1 < 1, got c1={params.c1}")
    if max_index < 1:
        raise ConfigError(f"max_index must be >= 1, got {max_index}")
    delta0 = 2.0 * (1.0 - params.c1) / (2.0 + params.c2)
    idx = np.arange(1, max_index + 1, dtype=np.float64)
    lam = math.pi**2 * ((idx[:, None] / params.lx) ** 2 + (idx[None, :] / params.ly) ** 2)
    lam = np.sort(lam.ravel())
    cutoff = 1.0 / delta0
    # smallest eigenvalue left out of the enumerated window
    missed = math.pi**2 * min(
        ((max_index + 1) / params.lx) ** 2 + (1 / params.ly) ** 2,
        (1 / params.lx) ** 2 + ((max_index + 1) / params.ly) ** 2,
    )
    if missed <= cutoff:
        raise ConfigError(
            f"max_index={max_index} too small: eigenvalues up to 1/delta0={cutoff:.6g} are not all enumerated"
        )
    n_required = int(np.count_nonzero(lam <= cutoff))
    return n_required, delta0, lam


@dataclass(frozen=True)
class TrackingReport:
    """Evaluation of the four sufficient conditions for exponential tracking."""

    m0: float
    n1_ok: bool
    n2_ok: bool
    mu1_ok: bool
    mu2_ok: bool
    n1_min: int
    n2_min: int
    mu1_min: float
    mu2_min: float

    @property
    def passed(self) -> bool:
        return self.n1_ok and self.n2_ok and self.mu1_ok and self.mu2_ok

    @property
    def status(self) -> str:
        return "pass" if self.passed else "conditions unmet"

    def lines(self) -> List[str]:
        flag = {True: "ok", False: "FAIL"}
        return [
            f"(1+6M0)/lambda_(N1+1) <= 1/2   {flag[self.n1_ok]}  (minimal N1 = {self.n1_min})",
            f"6M0/lambda_(N2+1) <= D1/2      {flag[self.n2_ok]}  (minimal N2 = {self.n2_min})",
            f"mu1 >= 1 + 6M0                 {flag[self.mu1_ok]}  (minimal mu1 = {self.mu1_min:.6g})",
            f"mu2 + h >= 6M0                 {flag[self.mu2_ok]}  (minimal mu2 = {self.mu2_min:.6g})",
        ]


def _min_modes(length, lower_bound):
    """Smallest N >= 0 with (N+1)^2 pi^2 / L^2 >= lower_bound."""
    if lower_bound <= 0:
        return 0
    k = max(1, math.ceil(length * math.sqrt(lower_bound) / math.pi))
    while k > 1 and continuum_eigenvalue(k - 1, length) >= lower_bound:
        k -= 1
    while continuum_eigenvalue(k, length) < lower_bound:
        k += 1
    return k - 1


def check_tracking_conditions(
    m0: float, params: Parameters1D, mu1: float, mu2: float, n1: int, n2: int
) -> TrackingReport:
    """Check the gain and mode-count conditions for tracking a reference.

    ``m0`` bounds the squared gradient norms of the reference and the
    controlled solution. Eigenvalues are the continuum ones ``(k pi / L)^2``.
    """
    if not m0 >= 0:
        raise ConfigError(f"m0 must be >= 0, got {m0}")
    length = params.length
    lam1 = float(continuum_eigenvalue(n1 + 1, length))
    lam2 = float(continuum_eigenvalue(n2 + 1, length))
    return TrackingReport(
        m0=m0,
        n1_ok=(1 + 6 * m0) / lam1 <= 0.5,
        n2_ok=6 * m0 / lam2 <= params.d1 / 2,
        mu1_ok=mu1 >= 1 + 6 * m0,
        mu2_ok=mu2 + params.h >= 6 * m0,
        n1_min=_min_modes(length, 2 * (1 + 6 * m0)),
        n2_min=_min_modes(length, 12 * m0 / params.d1),
        mu1_min=1 + 6 * m0,
        mu2_min=max(0.0, 6 * m0 - params.h),
    )
