"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: InputError -> 2, NumericError -> 3,
InfeasibleError -> 4.
"""


class RelulensError(Exception):
    """Base class for all library errors."""


class InputError(RelulensError, ValueError):
    """Malformed or inconsistent user input (shapes, schemas, documents)."""


class StaleIndexError(InputError):
    """A region index or merged model was built from a different network."""


class UndefinedMetricError(InputError):
    """A metric has no defined value for this input (e.g. single-class AUC)."""


class NumericError(RelulensError, ArithmeticError):
    """Non-finite values or a numerical procedure that failed to behave."""


class DivergenceError(NumericError):
    """Training loss became non-finite."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"training diverged at epoch {epoch} (non-finite loss)")


class InfeasibleError(RelulensError, ValueError):
    """A configuration that cannot be satisfied (e.g. more clusters than regions)."""
