"""Exception hierarchy shared by the library and the command line front end."""


class CgaError(Exception):
    """Base class for all errors raised by cgakit."""

    exit_code = 1


class DomainError(CgaError, ValueError):
    """An argument lies outside the domain of the operation."""

    exit_code = 2


class FormatError(DomainError):
    """A file or record does not follow the expected layout.

    ``line`` carries the 1-based line number when the problem is tied to one.
    """

    exit_code = 2

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CapacityError(CgaError):
    """A dense table or enumeration would exceed a guarded size limit."""

    exit_code = 3


class NumericalError(CgaError, ArithmeticError):
    """Optimisation diverged or a linear system could not be solved."""

    exit_code = 4

    def __init__(self, message, epoch=None):
        if epoch is not None:
            message = f"epoch {epoch}: {message}"
        super().__init__(message)
        self.epoch = epoch
