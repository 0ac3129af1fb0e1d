"""Semi-implicit simulation and Fourier-mode feedback for the 1D chevron system."""

from ._backend import current as backend
from .control import (
    ModeBasis,
    StabilizationPlan,
    build_mode_basis,
    check_tracking_conditions,
    mode_count_2d,
    plan_zero_stabilization,
)
from .diagnostics import (
    DiagnosticsRecord,
    damping_report,
    estimate_m0,
    record,
    verify_dissipative_bound,
)
from .discretization import TridiagonalOperator, coefficients, laplacian, system_matrices
from .errors import CGNonConvergence, ChevronError, ConfigError, InvariantBreach, SolverError
from .linalg import CGSolver, DirectSolver, LowRankUpdatedOperator, solve_cg, solve_tridiagonal
from .model import Grid1D, InitialSpec, Parameters1D, Parameters2D, RunConfig, State1D, initial_condition
from .stepper import StepOutcome, step_free, step_stabilized, step_tracking

__version__ = "0.1.0"
