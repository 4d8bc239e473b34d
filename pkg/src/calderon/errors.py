"""Exception types; the CLI maps them to exit codes."""


class ValidationError(ValueError):
    """Bad input: malformed grid, file, recipe or configuration (exit code 2)."""


class NumericalError(RuntimeError):
    """A numerical stage failed (exit code 3).

    ``module`` and ``stage`` name where the failure happened.
    """

    def __init__(self, message, module="", stage="", **info):
        self.module = module
        self.stage = stage
        self.info = info
        prefix = f"[{module}:{stage}] " if module else ""
        super().__init__(prefix + message)


class SingularNodeError(NumericalError):
    """A frequency node hits a zero of the Faddeev symbol."""


class ConvergenceError(NumericalError):
    """An iterative solver did not reach its tolerance."""


class DirichletEigenvalueError(NumericalError):
    """Zero looks like a Dirichlet eigenvalue of -Δ + v (solve is ill-conditioned)."""
