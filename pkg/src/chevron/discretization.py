"""Discrete Laplacian and per-step matrices of the semi-implicit scheme.

All operators act on the ``n - 1`` interior nodes. The Dirichlet zeros at
nodes ``0`` and ``n`` never enter a matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _backend
from .errors import ConfigError
from .model import Grid1D, Parameters1D, State1D

__all__ = [
    "TridiagonalOperator",
    "SchemeCoefficients",
    "SystemMatrices",
    "laplacian",
    "coefficients",
    "system_matrices",
]


@dataclass(frozen=True, eq=False)
class TridiagonalOperator:
    """Symmetric tridiagonal matrix stored as one diagonal and one off-diagonal."""

    diag: np.ndarray
    off: np.ndarray

    def __post_init__(self):
        diag = np.array(self.diag, dtype=np.float64)
        off = np.array(self.off, dtype=np.float64)
        if diag.ndim != 1 or off.ndim != 1 or off.shape[0] != diag.shape[0] - 1:
            raise ConfigError(f"off-diagonal must have length {diag.shape[0] - 1}, got {off.shape}")
        diag.flags.writeable = False
        off.flags.writeable = False
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "off", off)

    @property
    def size(self) -> int:
        return self.diag.shape[0]

    def matvec(self, x):
        """``T @ x`` for real or complex ``x`` (complex parts handled separately)."""
        x = np.asarray(x)
        if np.iscomplexobj(x):
            return self.matvec(x.real) + 1j * self.matvec(x.imag)
        return _backend.kernels.tridiag_matvec(self.diag, self.off, x)

    __matmul__ = matvec

    def quadratic(self, x) -> float:
        """``Re(x^H T x)``."""
        x = np.asarray(x)
        if np.iscomplexobj(x):
            return self.quadratic(x.real) + self.quadratic(x.imag)
        return float(x @ self.matvec(x))

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)


@dataclass(frozen=True, eq=False)
class SchemeCoefficients:
    """Splitting of the reaction terms into implicit (+) and explicit (-) parts.

    ``h_plus - h_minus = -1 + |A|^2 + phi^2`` and ``g_plus - g_minus = h - |A|^2``
    at every interior node; every vector is nonnegative.
    """

    h_plus: np.ndarray
    h_minus: np.ndarray
    g_plus: np.ndarray
    g_minus: np.ndarray

    @property
    def h_net(self) -> np.ndarray:
        return self.h_plus - self.h_minus

    @property
    def g_net(self) -> np.ndarray:
        return self.g_plus - self.g_minus


class SystemMatrices(NamedTuple):
    m_a: TridiagonalOperator
    l_a_diag: np.ndarray
    m_phi: TridiagonalOperator
    l_phi_diag: np.ndarray


def laplacian(grid: Grid1D) -> TridiagonalOperator:
    """Positive definite ``-d^2/dx^2`` with homogeneous Dirichlet conditions.

    Examples
    --------
    >>> lap = laplacian(Grid1D(n=4, dx=1.0, dt=0.1))
    >>> lap.diag.tolist(), lap.off.tolist()
    ([2.0, 2.0, 2.0], [-1.0, -1.0])
    """
    m = grid.n - 1
    inv = 1.0 / grid.dx**2
    return TridiagonalOperator(np.full(m, 2.0 * inv), np.full(m - 1, -inv))


def coefficients(state: State1D, params: Parameters1D) -> SchemeCoefficients:
    """Lagged coefficients evaluated on the step-``k`` state."""
    a = state.a_int
    phi = state.phi_int
    abs2 = a.real**2 + a.imag**2
    return SchemeCoefficients(
        h_plus=abs2 + phi**2,
        h_minus=np.ones_like(abs2),
        g_plus=np.full_like(abs2, params.h),
        g_minus=abs2,
    )


def system_matrices(
    lap: TridiagonalOperator,
    coeffs: SchemeCoefficients,
    params: Parameters1D,
    grid: Grid1D,
) -> SystemMatrices:
    """Assemble ``M_A, L_A, M_phi, L_phi``; the ``L`` matrices are diagonal."""
    r = grid.dt / params.tau
    s = grid.dt * params.d1
    m_a = TridiagonalOperator(1.0 + r * lap.diag + r * coeffs.h_plus, r * lap.off)
    m_phi = TridiagonalOperator(1.0 + s * lap.diag + grid.dt * coeffs.g_plus, s * lap.off)
    return SystemMatrices(
        m_a=m_a,
        l_a_diag=1.0 + r * coeffs.h_minus,
        m_phi=m_phi,
        l_phi_diag=1.0 + grid.dt * coeffs.g_minus,
    )
