"""Exception hierarchy shared by every module in the package."""


class RmtError(Exception):
    """Base class for all package errors."""


class ValidationError(RmtError, ValueError):
    """An argument violates a documented precondition."""


class DimensionError(ValidationError):
    """Matrix or vector sizes are inconsistent."""


class SchemaError(ValidationError):
    """An input file lacks the expected columns or fields."""


class ParseError(ValidationError):
    """An input file has a value that cannot be parsed.

    ``row`` is the zero-based data row index, or ``None`` when unknown.
    """

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class NumericalError(RmtError, ArithmeticError):
    """An iterative routine failed to converge.

    ``index`` identifies the eigenvalue (or step) that failed.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ResourceError(RmtError):
    """A computation would exceed a configured size cap."""


class TrainingError(RmtError):
    """Training diverged (loss became non-finite)."""

    def __init__(self, message, epoch):
        super().__init__(message)
        self.epoch = epoch
