"""
Exception hierarchy for the sampling toolkit.
"""


class ToolkitError(Exception):
    """Base class for all toolkit failures"""


class SpecError(ToolkitError, ValueError):
    """Invalid argument, config value or experiment spec entry (CLI exit code 2)"""

    def __init__(self, message: str, line: int = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class PointSetFormatError(SpecError):
    """Malformed point-set file"""


class PointSetParseError(PointSetFormatError):
    pass


class DimensionMismatchError(PointSetFormatError):
    pass


class OutOfRangeError(PointSetFormatError):
    pass


class SizeGuardError(SpecError):
    """Exact enumeration would exceed the work guard"""


class NumericalError(ToolkitError, ArithmeticError):
    """Non-finite optimizer state (CLI exit code 3)"""
