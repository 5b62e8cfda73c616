"""Exception types shared across the package.

The CLI maps each family onto a distinct exit code.
"""


class ConfigError(ValueError):
    """Invalid configuration or hyperparameter value."""


class CatalogError(ValueError):
    """Malformed or out-of-range catalog data."""


class NumericalError(RuntimeError):
    """A numeric routine failed (non-finite weights, rejection cap hit, ...)."""
