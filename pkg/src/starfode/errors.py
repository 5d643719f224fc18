"""Exception hierarchy shared by all solver modules."""


class StarfodeError(Exception):
    """Base class for package errors."""


class InvalidArgumentError(StarfodeError, ValueError):
    """An argument is outside its admissible set."""


class DomainError(StarfodeError, ValueError):
    """Evaluation point outside the supported domain."""


class AccuracyError(StarfodeError, ArithmeticError):
    """A series or iteration failed to reach the requested accuracy.

    Attributes
    ----------
    estimate : float or None
        Best available error estimate at the point of failure.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class BranchError(StarfodeError, ArithmeticError):
    """Principal-branch matrix function is undefined or ill-posed."""


class SolverError(StarfodeError, ArithmeticError):
    """Singular or numerically singular linear operator.

    Attributes
    ----------
    condition : float or None
        Condition number estimate, when available.
    """

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class ConvergenceError(SolverError):
    """Iterative scheme stagnated; ``diagnostics`` holds the history."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ResourceError(StarfodeError, MemoryError):
    """Requested problem size exceeds a configured guard."""


class ConfigError(StarfodeError, ValueError):
    """Malformed or schema-violating problem configuration."""


class AccuracyGuardError(StarfodeError):
    """An experiment finished but missed its accuracy threshold."""
