"""Exception types shared across the package.

Each numerical guard raises a subclass of ManisobError with a short
machine-readable ``code`` so callers (and the CLI) can map failures to
exit codes without parsing messages.
"""


class ManisobError(Exception):
    """Base class for all package errors."""

    code = "error"

    def __init__(self, message, code=None):
        super().__init__(message)
        if code is not None:
            self.code = code


class ConfigError(ManisobError):
    """Invalid configuration or preset parameters."""

    code = "invalid-config"


class DomainError(ManisobError):
    """A point or coordinate left the region where a map is defined."""

    code = "point-outside-domain"


class IntegrationError(ManisobError):
    """Geodesic or transport integration failed a guard."""

    code = "integration-failed"


class CoverageError(ManisobError):
    """Net, cover or atlas construction could not be certified."""

    code = "coverage-gap"


class SpectralError(ManisobError):
    """Grid based Fourier computation failed a resolution guard."""

    code = "aliasing-suspected"


class SymmetryError(ManisobError):
    """Group action or weighted norm guard failed."""

    code = "not-G-invariant"
