"""Shared exception types."""


class ConfigError(ValueError):
    """Invalid or internally inconsistent configuration."""


class UsageError(RuntimeError):
    """An operation was invoked outside its contract."""


class IntegrityError(RuntimeError):
    """Persisted data failed a consistency check (e.g. replay mismatch)."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values."""
