"""Exception and warning types shared across the package."""


class FieldDataError(ValueError):
    """Raised when field data fails an integrity check (NaN/Inf, grid mismatch)."""


class ArgumentError(ValueError):
    """Raised when an operation is called outside its admissible parameter range."""


class ConfigError(ValueError):
    """Raised for malformed or inconsistent run configurations."""


class StepFailureError(RuntimeError):
    """Raised when a time step cannot be completed.

    Carries a ``diagnostics`` dict (time, dt, field extrema) so the caller can
    persist the last valid state.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class DegenerateTangentError(RuntimeError):
    """Raised when a boundary marker tangent collapses below tolerance."""


class DomainEscapeError(RuntimeError):
    """Raised when a tracked marker leaves the central safe region of the box."""


class MeanRemovalWarning(UserWarning):
    """Issued when a nominally mean-free field had its mean removed."""
