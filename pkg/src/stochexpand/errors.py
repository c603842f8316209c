"""Shared exception types."""


class StochexpandError(Exception):
    pass


class SizeError(StochexpandError):
    """A resource guard (memory budget, jump budget, cost guard) was exceeded."""


class ConfigError(StochexpandError):
    """Invalid configuration document or argument combination."""


class QuadratureError(StochexpandError):
    """Quadrature failed to converge; carries the partial value."""

    def __init__(self, message, partial=None, error_estimate=None):
        super().__init__(message)
        self.partial = partial
        self.error_estimate = error_estimate
