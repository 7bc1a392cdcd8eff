"""Exception hierarchy shared across the toolkit."""


class GlimitError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(GlimitError):
    """Invalid configuration or unsupported operation."""


class UsageError(GlimitError):
    """An API was called with arguments violating its preconditions."""


class NumericError(GlimitError):
    """A computation produced a non-finite value or failed to converge."""

    def __init__(self, message, *, node=None, residual=None):
        super().__init__(message)
        self.node = node
        self.residual = residual


class EllipticityError(NumericError):
    """A coefficient left its ellipticity window (non-positive or unbounded)."""
