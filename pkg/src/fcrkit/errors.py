"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration value is invalid or inconsistent."""


class DataFormatError(ValueError):
    """A dataset file is malformed; ``line`` is the 1-based offending line."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericError(RuntimeError):
    """A computation produced a non-finite result it cannot recover from."""
