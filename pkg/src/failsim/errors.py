"""Exception types shared across failsim."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class DegenerateDataError(ValueError):
    """Data cannot identify the requested parameters."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class UnsupportedModeError(ValueError):
    """The requested computation is not defined for this shock model."""


class ValidationError(ValueError):
    """One or more model invariants are violated.

    ``violations`` holds ``(field_path, message)`` pairs.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = [f"{path}: {msg}" for path, msg in self.violations]
        super().__init__("; ".join(lines) if lines else "invalid input")


class NoOptimumError(RuntimeError):
    """No finite cost rate was found on the search grid."""
