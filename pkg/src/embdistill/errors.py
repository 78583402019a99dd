"""Exception types shared across the toolkit.

The CLI maps these onto distinct exit codes (2 config, 3 data,
4 numeric divergence), so library code should raise the most specific
class that applies.
"""


class ConfigError(ValueError):
    """Invalid parameter, option, or configuration value."""


class DimensionError(ConfigError):
    """Operands with incompatible shapes."""


class DataError(ValueError):
    """Problem with input data or its contents."""


class ParseError(DataError):
    """Malformed text input; the message carries file/line/offset context."""


class FormatError(DataError):
    """Malformed or truncated binary artifact."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""


class StaleCacheError(RuntimeError):
    """A backward pass received a cache from an outdated forward pass."""
