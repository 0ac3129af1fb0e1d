"""Exception hierarchy. The CLI maps each class onto an exit code."""


class ChevronError(Exception):
    exit_code = 1


class ConfigError(ChevronError, ValueError):
    """Invalid parameters, grids, configuration files or input data."""

    exit_code = 2


class SolverError(ChevronError, RuntimeError):
    """A linear solve failed (tiny pivot, CG non-convergence)."""

    exit_code = 3

    def __init__(self, message, step=None):
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)
        self.step = step


class CGNonConvergence(SolverError):
    """CG hit ``max_iter``; carries the best iterate and its residual."""

    def __init__(self, message, solution=None, residual=None, iterations=None, step=None):
        super().__init__(message, step=step)
        self.solution = solution
        self.residual = residual
        self.iterations = iterations


class InvariantBreach(ChevronError, RuntimeError):
    """A property guaranteed by the scheme was observed to fail."""

    exit_code = 4
