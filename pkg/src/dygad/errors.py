"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
NumericalError -> 3.
"""


class DygadError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(DygadError):
    """Invalid configuration value (bad flag, out-of-range hyperparameter)."""


class DataError(DygadError):
    """Problem with input data (parse failure, impossible request)."""


class NumericalError(DygadError):
    """Numerical failure (non-finite loss, failed solve)."""
