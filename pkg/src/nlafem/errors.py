"""Exception types shared across the package."""


class NlafemError(Exception):
    """Base class for all package errors."""


class ConformityError(NlafemError):
    """Mesh input or result violates conformity (hanging nodes, bad incidence)."""


class GeometryError(NlafemError):
    """Degenerate or negatively oriented element."""


class ClosureError(NlafemError):
    """Conformity closure did not terminate within the depth bound."""


class SpaceTooSmall(NlafemError):
    """Finite element space has no interior degrees of freedom."""


class DimensionError(NlafemError):
    """Vector length does not match the expected dimension."""


class WeightSingularError(NlafemError):
    """A weight evaluated to NaN/inf at a quadrature point."""

    def __init__(self, point, value):
        self.point = tuple(point)
        self.value = value
        super().__init__(f"weight is {value} at quadrature point {self.point}")


class LinearSolveError(NlafemError):
    """Iterative linear solver failed to reach the requested tolerance."""


class EigenConvergenceError(NlafemError):
    """Eigensolver did not converge; carries the best iterate."""

    def __init__(self, message, result=None):
        self.result = result
        super().__init__(message)


class OperatorError(NlafemError):
    """Operator violates a required property (e.g. B not positive definite)."""


class RankError(NlafemError):
    """Numerically rank-deficient block passed to orthonormalization."""


class ScfConvergenceError(NlafemError):
    """SCF loop exceeded max_outer; carries the last iterate and residuals."""

    def __init__(self, message, state=None, residual_history=None):
        self.state = state
        self.residual_history = residual_history or []
        super().__init__(message)


class SizeError(NlafemError):
    """Symbolic construction exceeded the configured term cap."""


class DomainError(NlafemError):
    """A log argument was nonpositive at a sample point."""


class ConfigError(NlafemError):
    """Invalid run configuration; message is line-anchored when possible."""


class ParseError(NlafemError):
    """Malformed CSV or mesh file."""
