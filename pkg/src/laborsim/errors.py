"""Exception types shared across the package."""


class LaborSimError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(LaborSimError):
    """Invalid or malformed configuration."""


class NotAtRiskError(LaborSimError):
    """Operation requires an at-risk state (in labor, no outcome yet)."""


class IrreversibilityError(LaborSimError):
    """Attempt to undo a cesarean (action 0 after action 1)."""


class DataFormatError(LaborSimError):
    """Malformed or invariant-violating person-hour data.

    Carries the offending row number when ingesting from disk.
    """

    def __init__(self, message: str, row: int | None = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class SeparationError(LaborSimError):
    """Perfect separation / degenerate labels in a logistic fit."""


class NonConvergenceError(LaborSimError):
    """Iterative fit did not converge within the iteration budget."""


class PositivityError(LaborSimError):
    """Empty regime-consistent stratum; the estimand is not estimable
    from this dataset at the requested hour."""
