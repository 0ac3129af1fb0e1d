"""Linear solvers for the per-step systems.

Three routes: a direct tridiagonal (Thomas) solve, conjugate gradient on any
SPD operator, and CG on a tridiagonal matrix plus a symmetric rank-K update
``T + s F F^T`` that is applied in factored form and never densified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Tuple, Union

import numpy as np

from . import _backend
from .discretization import TridiagonalOperator
from .errors import CGNonConvergence, ConfigError, SolverError
from .model import SolverSpec

__all__ = [
    "LowRankUpdatedOperator",
    "solve_tridiagonal",
    "solve_cg",
    "DirectSolver",
    "CGSolver",
    "make_solver",
]

DIRECT_LOWRANK_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class LowRankUpdatedOperator:
    """``base + scale * factor @ factor.T`` applied as composed."""

    base: TridiagonalOperator
    factor: np.ndarray
    scale: float

    def __post_init__(self):
        factor = np.ascontiguousarray(self.factor, dtype=np.float64)
        if factor.ndim == 1:
            factor = factor[:, None]
        if factor.shape[0] != self.base.size:
            raise ConfigError(f"factor has {factor.shape[0]} rows, operator size is {self.base.size}")
        if not self.scale >= 0:
            raise ConfigError(f"low-rank scale must be >= 0, got {self.scale}")
        object.__setattr__(self, "factor", factor)
        object.__setattr__(self, "scale", float(self.scale))

    @property
    def size(self) -> int:
        return self.base.size

    @property
    def rank(self) -> int:
        return self.factor.shape[1]

    @property
    def is_trivial(self) -> bool:
        return self.rank == 0 or self.scale == 0.0

    def matvec(self, x):
        x = np.asarray(x)
        if np.iscomplexobj(x):
            return self.matvec(x.real) + 1j * self.matvec(x.imag)
        return _backend.kernels.lowrank_matvec(self.base.diag, self.base.off, self.factor, self.scale, x)

    __matmul__ = matvec

    def to_dense(self) -> np.ndarray:
        return self.base.to_dense() + self.scale * (self.factor @ self.factor.T)


Operator = Union[TridiagonalOperator, LowRankUpdatedOperator]


def solve_tridiagonal(op: TridiagonalOperator, rhs) -> np.ndarray:
    """Thomas algorithm for the SPD tridiagonal ``op``.

    ``rhs`` may be a vector or an ``(m, p)`` block of right-hand sides.
    Raises :class:`SolverError` if a pivot falls below 1e-300 in magnitude.
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    if rhs.shape[0] != op.size:
        raise ConfigError(f"rhs has length {rhs.shape[0]}, operator size is {op.size}")
    x, bad_row = _backend.kernels.thomas(op.diag, op.off, rhs)
    if bad_row >= 0:
        raise SolverError(f"tridiagonal pivot below 1e-300 at row {bad_row}")
    return x


def _generic_cg(apply, b, tol, max_iter):
    x = np.zeros_like(b)
    bnorm = math.sqrt(float(b @ b))
    if bnorm == 0.0:
        return x, 0, True, 0.0
    target = tol * bnorm
    r = b.copy()
    p = b.copy()
    rs = float(r @ r)
    rnorm = math.sqrt(rs)
    it = 0
    while it < max_iter:
        ap = np.asarray(apply(p), dtype=np.float64)
        alpha = rs / float(p @ ap)
        x += alpha * p
        r -= alpha * ap
        it += 1
        rs_new = float(r @ r)
        if math.sqrt(rs_new) <= target:
            r = b - np.asarray(apply(x), dtype=np.float64)
            rs_new = float(r @ r)
            rnorm = math.sqrt(rs_new)
            if rnorm <= target:
                return x, it, True, rnorm
            p = r.copy()
            rs = rs_new
            continue
        p = r + (rs_new / rs) * p
        rs = rs_new
        rnorm = math.sqrt(rs)
    return x, it, False, rnorm


def solve_cg(
    apply: Union[Operator, Callable[[np.ndarray], np.ndarray]],
    rhs,
    tol: float = 1e-10,
    max_iter: int | None = None,
) -> Tuple[np.ndarray, int]:
    """Conjugate gradient from a zero initial guess.

    Parameters
    ----------
    apply : TridiagonalOperator, LowRankUpdatedOperator or callable
        SPD operator. The two operator types run in the compiled kernel; any
        other callable ``x -> A @ x`` runs the same iteration in NumPy.
    rhs : ndarray
        Real right-hand side.
    tol : float
        Stop once ``||A x - rhs|| <= tol * ||rhs||`` (checked on the true
        residual). A zero ``rhs`` returns zero after 0 iterations.
    max_iter : int, optional
        Defaults to ``2 * len(rhs)``.

    Returns
    -------
    solution, iterations

    Raises
    ------
    CGNonConvergence
        With the last iterate and its residual attached.
    """
    b = np.array(rhs, dtype=np.float64)
    if max_iter is None:
        max_iter = 2 * b.shape[0]
    if isinstance(apply, TridiagonalOperator):
        x, it, ok, res = _backend.kernels.cg(apply.diag, apply.off, np.empty((apply.size, 0)), 0.0, b, tol, max_iter)
    elif isinstance(apply, LowRankUpdatedOperator):
        base = apply.base
        x, it, ok, res = _backend.kernels.cg(base.diag, base.off, apply.factor, apply.scale, b, tol, max_iter)
    else:
        x, it, ok, res = _generic_cg(apply, b, tol, max_iter)
    if not ok:
        raise CGNonConvergence(
            f"CG did not reach relative residual {tol:g} in {max_iter} iterations (residual {res:.3e})",
            solution=x,
            residual=res,
            iterations=it,
        )
    return x, it


class DirectSolver:
    """Thomas for tridiagonal systems.

    Low-rank-updated systems with a nonzero update have no direct route here,
    so they go through CG at a tight tolerance; a zero update falls back to
    Thomas on the base so results are bitwise those of the free scheme.
    """

    name = "direct"

    def solve(self, op: Operator, rhs) -> Tuple[np.ndarray, int]:
        if isinstance(op, LowRankUpdatedOperator):
            if op.is_trivial:
                return solve_tridiagonal(op.base, rhs), 0
            return solve_cg(op, rhs, tol=DIRECT_LOWRANK_TOL, max_iter=10 * op.size)
        return solve_tridiagonal(op, rhs), 0

    def solve_complex(self, op: Operator, rhs) -> Tuple[np.ndarray, Tuple[int, int]]:
        rhs = np.asarray(rhs)
        if isinstance(op, TridiagonalOperator) or op.is_trivial:
            base = op if isinstance(op, TridiagonalOperator) else op.base
            x = solve_tridiagonal(base, np.stack([rhs.real, rhs.imag], axis=1))
            return x[:, 0] + 1j * x[:, 1], (0, 0)
        xr, ir = self.solve(op, rhs.real)
        xi, ii = self.solve(op, rhs.imag)
        return xr + 1j * xi, (ir, ii)


class CGSolver:
    name = "cg"

    def __init__(self, tol: float = 1e-10, max_iter: int | None = None):
        self.tol = tol
        self.max_iter = max_iter

    def solve(self, op: Operator, rhs) -> Tuple[np.ndarray, int]:
        return solve_cg(op, rhs, tol=self.tol, max_iter=self.max_iter)

    def solve_complex(self, op: Operator, rhs) -> Tuple[np.ndarray, Tuple[int, int]]:
        rhs = np.asarray(rhs)
        xr, ir = self.solve(op, rhs.real)
        xi, ii = self.solve(op, rhs.imag)
        return xr + 1j * xi, (ir, ii)


def make_solver(spec: SolverSpec):
    if spec.kind == "direct":
        return DirectSolver()
    return CGSolver(spec.tol, spec.max_iter)
