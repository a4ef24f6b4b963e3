"""Exception types shared across the package."""


class SsflrdError(Exception):
    """Base class for all package errors."""


class GridError(SsflrdError, ValueError):
    """Invalid sampling grid."""


class DimensionError(SsflrdError, ValueError):
    """Curves, operators or designs that do not share a grid or size."""


class NumericError(SsflrdError, ArithmeticError):
    """A factorization failed or produced non-finite output."""


class EmptyWindowError(SsflrdError, ValueError):
    """No design site carries positive kernel weight at an evaluation point."""


class TuningError(SsflrdError, RuntimeError):
    """Every candidate in a tuning grid produced an invalid score."""

    def __init__(self, message, stage=None):
        super().__init__(message if stage is None else f"[{stage}] {message}")
        self.stage = stage


class DataFormatError(SsflrdError, ValueError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class ConfigError(SsflrdError, ValueError):
    """Unknown key or invalid value in a run configuration."""
