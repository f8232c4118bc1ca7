"""
Exception hierarchy shared by every neutrosophic-eval module.
"""


class NeutroEvalError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(NeutroEvalError, ValueError):
    """An input lies outside the domain of an operation."""


class EmptyResultError(DomainError):
    """A rate, mean or corpus has nothing to aggregate over."""


class UndefinedCorrelationError(DomainError):
    """A correlation was requested over a variable with zero variance."""


class ConfigError(NeutroEvalError, ValueError):
    """The configuration document is malformed or violates a RunConfig invariant."""


class StartupError(NeutroEvalError, RuntimeError):
    """A run or server could not start (missing API key, port in use)."""


class SchemaError(NeutroEvalError, ValueError):
    """An archive file does not conform to the expected schema."""

    def __init__(self, message, column=None, line=None, path=None):
        self.column = column
        self.line = line
        self.path = path
        location = []
        if path is not None:
            location.append(str(path))
        if line is not None:
            location.append(f"line {line}")
        if column is not None:
            location.append(f"column '{column}'")
        prefix = ", ".join(location)
        super().__init__(f"{prefix}: {message}" if prefix else message)
