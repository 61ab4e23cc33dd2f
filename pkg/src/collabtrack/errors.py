"""Exception types shared across the package."""


class FormatError(ValueError):
    """A data file (PGM, CSV, ground truth, model binary) is malformed."""


class ConfigError(ValueError):
    """A configuration key or value is unusable (usage-level error)."""


class NumericError(ArithmeticError):
    """A computation produced NaN or infinite values."""
