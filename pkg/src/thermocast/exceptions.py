"""Package-level exception types.

The CLI maps these onto process exit codes, so anything raised across a
public boundary should be one of these (or a plain OSError for I/O).
"""


class ConfigError(ValueError):
    """A run configuration is malformed or internally inconsistent."""


class DataError(ValueError):
    """Input data violates a precondition (bad timestamps, gaps, ranges)."""


class DivergenceError(ArithmeticError):
    """A numeric procedure produced non-finite values or left its domain."""
