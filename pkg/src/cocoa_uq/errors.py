"""Error taxonomy shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 2, DataError -> 3,
ProviderError -> 4.
"""


class CocoaError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(CocoaError):
    """Invalid configuration: unknown names, bad ranges, missing settings."""


class DataError(CocoaError):
    """Invalid or insufficient input data (records, scores, qualities)."""


class ProviderError(CocoaError):
    """Remote similarity provider failed or violated the wire contract."""


class UndefinedPRRError(DataError):
    """PRR has no defined value for this instance set (degenerate denominator)."""
