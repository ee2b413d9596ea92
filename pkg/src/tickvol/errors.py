"""Exception and warning types shared across the package."""


class TickvolError(Exception):
    """Base class for package errors."""


class DataError(TickvolError):
    """Input data cannot be used (unusable day, malformed file, degenerate input)."""


class NumericalError(TickvolError):
    """A numerical procedure failed (non-finite likelihood, infeasible variance)."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class CleaningWarning(UserWarning):
    """Non-fatal issue during tick cleaning or aggregation."""


class FittingWarning(UserWarning):
    """Non-fatal issue during curve fitting or model estimation."""
