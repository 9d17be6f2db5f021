"""Exception types shared across the package."""


class SsalError(Exception):
    """Base class for package errors."""


class ShapeError(SsalError, ValueError):
    """Tensor/array dimensions incompatible with an operation."""


class ConfigError(SsalError, ValueError):
    """Invalid, unknown, or out-of-range configuration field."""


class DataFormatError(SsalError, ValueError):
    """Corrupt or inconsistent on-disk dataset/checkpoint data."""


class PoolError(SsalError, ValueError):
    """Illegal labeled/unlabeled/test pool transition."""
