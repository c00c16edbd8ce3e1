"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Inconsistent dimensions or invalid configuration values."""


class DegenerateInputError(ValueError):
    """Numerically degenerate input (e.g. an all-zero precoder) that the
    caller must fix by re-initializing."""
