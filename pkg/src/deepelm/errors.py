"""Exception types shared across the package."""


class DelmError(Exception):
    """Base class for errors raised by this package."""


class DataError(DelmError):
    """Bad input data: missing files, malformed manifests, mismatched matrices."""


class ConfigError(DelmError):
    """Invalid training or evaluation-protocol configuration."""


class NumericError(DelmError):
    """A numeric computation produced an unusable result."""
