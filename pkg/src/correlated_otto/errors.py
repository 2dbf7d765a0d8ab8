"""Exception hierarchy shared by all modules."""


class OttoError(Exception):
    """Base class for every error raised by this package."""


class DomainError(OttoError, ValueError):
    """Input lies outside the physical or mathematical domain of an operation."""


class TruncationError(OttoError):
    """Fock-space cutoff too small for the requested accuracy."""

    def __init__(self, message, required_dim=None):
        super().__init__(message)
        self.required_dim = required_dim


class ConvergenceError(OttoError):
    """An iterative procedure exhausted its budget."""


class BranchCutError(OttoError):
    """A complex square root argument crossed the principal branch cut."""


class NormalizationError(OttoError):
    """A probability object failed its normalization check."""


class DiagnosticError(OttoError):
    """Two independent computations of the same quantity disagree."""
