"""Core value types: physical parameters, grids, fields and run configuration.

Fields live on all ``n + 1`` grid nodes, boundary zeros included, so that node
index ``i`` in every formula is the array index. Interior-only views
(``a_int``, ``phi_int``) are derived on demand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import ConfigError

__all__ = [
    "Parameters1D",
    "Parameters2D",
    "Grid1D",
    "State1D",
    "InitialSpec",
    "NoControl",
    "ZeroStabilization",
    "Tracking",
    "SolverSpec",
    "OutputSpec",
    "RunConfig",
    "initial_condition",
]


def _require(cond, message):
    if not cond:
        raise ConfigError(message)


def _finite(name, value):
    _require(isinstance(value, (int, float, np.floating, np.integer)), f"{name} must be a number, got {value!r}")
    _require(math.isfinite(value), f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class Parameters1D:
    """Physical constants of the 1D system.

    Parameters
    ----------
    tau : float
        Relaxation time of the amplitude equation (> 0).
    d1 : float
        Director diffusion coefficient (> 0).
    h : float
        Director damping (>= 0).
    length : float
        Domain length ``L`` (> 0).
    """

    tau: float = 1.0
    d1: float = 1.0
    h: float = 0.1
    length: float = 100.0

    def __post_init__(self):
        for name in ("tau", "d1", "h", "length"):
            _finite(name, getattr(self, name))
        _require(self.tau > 0, f"tau must be > 0, got {self.tau}")
        _require(self.d1 > 0, f"d1 must be > 0, got {self.d1}")
        _require(self.h >= 0, f"h must be >= 0, got {self.h}")
        _require(self.length > 0, f"length must be > 0, got {self.length}")


@dataclass(frozen=True)
class Parameters2D:
    """Constants of the planar system; only used to count stabilizing modes."""

    tau: float = 1.0
    d1: float = 1.0
    d2: float = 1.0
    h: float = 0.1
    c1: float = 0.0
    c2: float = 0.0
    beta: float = 0.0
    lx: float = math.pi
    ly: float = math.pi

    def __post_init__(self):
        for name in ("tau", "d1", "d2", "h", "c1", "c2", "beta", "lx", "ly"):
            _finite(name, getattr(self, name))
        for name in ("tau", "d1", "d2", "lx", "ly"):
            _require(getattr(self, name) > 0, f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("h", "c1", "c2"):
            _require(getattr(self, name) >= 0, f"{name} must be >= 0, got {getattr(self, name)}")
        _require(
            self.c1 < 1 or self.c1 >= 2 * self.c2,
            f"need c1 < 1 or c1 >= 2*c2, got c1={self.c1}, c2={self.c2}",
        )


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid with ``n`` intervals of width ``dx`` and time step ``dt``."""

    n: int
    dx: float
    dt: float

    def __post_init__(self):
        _require(isinstance(self.n, (int, np.integer)) and not isinstance(self.n, bool), f"n must be an integer, got {self.n!r}")
        _require(self.n >= 3, f"n must be >= 3, got {self.n}")
        _finite("dx", self.dx)
        _finite("dt", self.dt)
        _require(self.dx > 0, f"dx must be > 0, got {self.dx}")
        _require(self.dt > 0, f"dt must be > 0, got {self.dt}")

    @classmethod
    def from_length(cls, length: float, n: int, dt: float) -> "Grid1D":
        _finite("length", length)
        _require(length > 0, f"length must be > 0, got {length}")
        return cls(n=int(n), dx=length / n, dt=dt)

    @property
    def length(self) -> float:
        return self.n * self.dx

    @property
    def interior(self) -> int:
        return self.n - 1

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.dx

    def check_length(self, length: float) -> None:
        if abs(self.dx * self.n - length) > 1e-12 * length:
            raise ConfigError(f"grid spans {self.dx * self.n!r}, domain length is {length!r}")


def _frozen(arr):
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class State1D:
    """Complex amplitude ``a`` and real director angle ``phi`` at step ``step``.

    ``time`` is stored alongside ``step`` and always equals ``step * dt`` for
    states produced by the steppers.
    """

    a: np.ndarray
    phi: np.ndarray
    time: float = 0.0
    step: int = 0

    def __post_init__(self):
        a = np.array(self.a, dtype=np.complex128, copy=True)
        phi = np.array(self.phi, dtype=np.float64, copy=True)
        _require(a.ndim == 1 and phi.ndim == 1, "fields must be one-dimensional")
        _require(a.shape == phi.shape, f"field lengths differ: {a.shape[0]} vs {phi.shape[0]}")
        _require(a.shape[0] >= 4, "fields need at least 4 nodes (n >= 3)")
        _require(a[0] == 0 and a[-1] == 0, "amplitude must vanish at both boundary nodes")
        _require(phi[0] == 0 and phi[-1] == 0, "director angle must vanish at both boundary nodes")
        _require(np.all(np.isfinite(a)) and np.all(np.isfinite(phi)), "fields must be finite")
        _finite("time", self.time)
        _require(self.time >= 0, f"time must be >= 0, got {self.time}")
        object.__setattr__(self, "a", _frozen(a))
        object.__setattr__(self, "phi", _frozen(phi))
        object.__setattr__(self, "step", int(self.step))

    @classmethod
    def zeros(cls, grid: Grid1D) -> "State1D":
        return cls(np.zeros(grid.n + 1, dtype=np.complex128), np.zeros(grid.n + 1))

    @classmethod
    def from_interior(cls, a_int, phi_int, time=0.0, step=0) -> "State1D":
        a = np.zeros(len(a_int) + 2, dtype=np.complex128)
        phi = np.zeros(len(phi_int) + 2)
        a[1:-1] = a_int
        phi[1:-1] = phi_int
        return cls(a, phi, time, step)

    @property
    def n(self) -> int:
        return self.a.shape[0] - 1

    @property
    def a_int(self) -> np.ndarray:
        return self.a[1:-1]

    @property
    def phi_int(self) -> np.ndarray:
        return self.phi[1:-1]

    def check_grid(self, grid: Grid1D) -> None:
        if self.n != grid.n:
            raise ConfigError(f"state has n={self.n}, grid has n={grid.n}")

    def same_fields(self, other: "State1D") -> bool:
        return np.array_equal(self.a, other.a) and np.array_equal(self.phi, other.phi)


@dataclass(frozen=True)
class InitialSpec:
    """Recipe for an initial state, see :func:`initial_condition`."""

    kind: str = "oscillatory"
    seed: int = 0
    amplitude: float = 1.0
    center: Optional[float] = None
    width: Optional[float] = None
    path: Optional[str] = None

    def __post_init__(self):
        _require(
            self.kind in ("oscillatory", "gaussian", "zero", "from_file"),
            f"unknown initial condition kind {self.kind!r}",
        )
        _finite("amplitude", self.amplitude)
        if self.kind == "from_file":
            _require(self.path, "initial condition 'from_file' needs a path")


@dataclass(frozen=True)
class NoControl:
    name = "none"


@dataclass(frozen=True)
class ZeroStabilization:
    """Feedback on the first ``k_modes`` sine modes of the amplitude.

    With ``auto`` set, ``mu`` and ``k_modes`` are replaced at run time by the
    prescription computed from the initial amplitude.
    """

    mu: float = 1.0
    k_modes: int = 1
    auto: bool = False
    epsilon: float = 1e-6

    name = "zero_stabilization"

    def __post_init__(self):
        _finite("mu", self.mu)
        _require(self.mu >= 0, f"mu must be >= 0, got {self.mu}")
        _require(self.k_modes >= 1, f"k_modes must be >= 1, got {self.k_modes}")
        _require(self.epsilon > 0, f"epsilon must be > 0, got {self.epsilon}")


@dataclass(frozen=True)
class Tracking:
    """Feedback gains pulling a controlled run onto a reference run."""

    mu1: float = 1.0
    mu2: float = 1.0
    n1: int = 1
    n2: int = 1
    auto: bool = False

    name = "tracking"

    def __post_init__(self):
        for name in ("mu1", "mu2"):
            _finite(name, getattr(self, name))
            _require(getattr(self, name) >= 0, f"{name} must be >= 0")
        _require(self.n1 >= 0 and self.n2 >= 0, "n1 and n2 must be >= 0")


Control = Union[NoControl, ZeroStabilization, Tracking]


@dataclass(frozen=True)
class SolverSpec:
    kind: str = "direct"
    tol: float = 1e-10
    max_iter: Optional[int] = None

    def __post_init__(self):
        _require(self.kind in ("direct", "cg"), f"solver must be 'direct' or 'cg', got {self.kind!r}")
        _require(self.tol > 0, f"solver tol must be > 0, got {self.tol}")
        _require(self.max_iter is None or self.max_iter >= 1, "max_iter must be >= 1")


@dataclass(frozen=True)
class OutputSpec:
    directory: Optional[str] = None
    snapshot_stride: int = 0
    diagnostics_stride: int = 1

    def __post_init__(self):
        _require(self.snapshot_stride >= 0, "snapshot stride must be >= 0 (0 disables snapshots)")
        _require(self.diagnostics_stride >= 1, "diagnostics stride must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    params: Parameters1D
    grid: Grid1D
    steps: int
    initial: InitialSpec = field(default_factory=InitialSpec)
    control: Control = field(default_factory=NoControl)
    solver: SolverSpec = field(default_factory=SolverSpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    stop_below: float = 0.0

    def __post_init__(self):
        _require(self.steps >= 1, f"steps must be >= 1, got {self.steps}")
        self.grid.check_length(self.params.length)
        m = self.grid.n - 1
        if isinstance(self.control, ZeroStabilization) and not self.control.auto:
            _require(self.control.k_modes <= m, f"k_modes={self.control.k_modes} exceeds n-1={m}")
        if isinstance(self.control, Tracking) and not self.control.auto:
            _require(self.control.n1 <= m and self.control.n2 <= m, f"n1, n2 must not exceed n-1={m}")

    def with_(self, **changes) -> "RunConfig":
        return replace(self, **changes)


def _gaussian(grid, center, width, amplitude):
    x = grid.x
    profile = amplitude * np.exp(-0.5 * ((x - center) / width) ** 2)
    profile[0] = profile[-1] = 0.0
    return profile


def initial_condition(spec: InitialSpec, grid: Grid1D) -> State1D:
    """Build the state at ``t = 0`` described by ``spec``.

    ``oscillatory`` draws the interior values of ``Re A``, ``Im A`` and ``phi``
    (in that order) independently and uniformly from
    ``[-amplitude, amplitude]`` with ``numpy.random.default_rng(seed)``.
    ``gaussian`` puts the same real bump ``amplitude * exp(-(x-c)^2 / 2w^2)``
    in ``A`` and ``phi``; ``center`` and ``width`` default to ``L/2`` and
    ``L/10``. ``from_file`` reads a snapshot file.
    """
    m = grid.n - 1
    if spec.kind == "zero":
        return State1D.zeros(grid)
    if spec.kind == "oscillatory":
        rng = np.random.default_rng(spec.seed)
        amp = spec.amplitude
        re = rng.uniform(-amp, amp, m)
        im = rng.uniform(-amp, amp, m)
        phi = rng.uniform(-amp, amp, m)
        return State1D.from_interior(re + 1j * im, phi)
    if spec.kind == "gaussian":
        center = grid.length / 2 if spec.center is None else spec.center
        width = grid.length / 10 if spec.width is None else spec.width
        _require(width > 0, f"gaussian width must be > 0, got {width}")
        profile = _gaussian(grid, center, width, spec.amplitude)
        return State1D(profile.astype(np.complex128), profile)

    from .io import read_snapshot

    state = read_snapshot(Path(spec.path))
    state.check_grid(grid)
    return state
