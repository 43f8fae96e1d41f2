"""Error taxonomy shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 2, DataError -> 3,
ModelError -> 4.
"""


class BridgeError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(BridgeError):
    """Invalid configuration: unknown names, bad ranges, missing settings."""


class DataError(BridgeError):
    """Invalid or insufficient input data (datasets, templates)."""


class ModelError(BridgeError):
    """Model loading or inference failed."""


class GenerationError(BridgeError):
    """One record could not be produced; the producer skips it."""
