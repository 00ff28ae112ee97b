"""Exception types raised across the package."""


class PHGCLError(Exception):
    """Base class for package errors."""


class StructuralError(PHGCLError, ValueError):
    """Input arrays or graphs have an invalid shape or structure."""


class ParameterError(PHGCLError, ValueError):
    """A numeric parameter is out of its admissible range."""


class ParseError(PHGCLError, ValueError):
    """A dataset or checkpoint file could not be decoded."""

    def __init__(self, message: str, record: int | None = None):
        if record is not None:
            message = f"record {record}: {message}"
        super().__init__(message)
        self.record = record


class ConfigError(PHGCLError, ValueError):
    """A configuration is inconsistent or contains unknown keys."""


class StratificationError(PHGCLError, ValueError):
    """A cross-validation split would leave a class out of a fold."""
