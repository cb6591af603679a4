"""Exception types shared across the package."""


class PlapboundsError(Exception):
    """Base class for all package-specific errors."""


class QuadratureError(PlapboundsError):
    """Adaptive quadrature failed to converge within the allowed depth."""


class DomainError(PlapboundsError):
    """An argument lies outside the admissible range of an operation."""


class TooCoarseGridError(PlapboundsError):
    """Grid spacing too large to resolve the domain."""


class DivergenceError(PlapboundsError):
    """A requested integral does not converge for the given exponents."""


class DegenerateWeightError(PlapboundsError):
    """Weight vanishes where the operation needs it to be positive."""


class UnsupportedExponentError(PlapboundsError):
    """Exponent p outside the range the solvers support."""


class ConfigError(PlapboundsError):
    """Scenario configuration is invalid."""


class SolverConvergenceError(PlapboundsError):
    """Eigensolver hit the iteration limit; carries the last iterate."""

    def __init__(self, message, lam=None, field=None, iterations=None, residual=None):
        super().__init__(message)
        self.lam = lam
        self.field = field
        self.iterations = iterations
        self.residual = residual
