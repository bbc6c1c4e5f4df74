"""Exception hierarchy shared by every module.

The CLI maps each class onto a process exit code, so library code raises
these rather than bare ``ValueError``/``RuntimeError``.
"""


class FascError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ValidationError(FascError, ValueError):
    """An input violated a documented precondition or invariant."""

    exit_code = 2


class NumericalError(FascError, ArithmeticError):
    """A numerical routine failed to reach its accuracy contract."""

    exit_code = 3

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class IngestError(FascError, OSError):
    """Reading or writing a file failed, or a file did not parse."""

    exit_code = 4

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column
