"""Exception types raised across the package."""


class FracQuantError(Exception):
    """Base class for all package errors."""


class InputError(FracQuantError, ValueError):
    """Malformed or inconsistent arguments (dimension mismatch, bad grids)."""


class DomainError(FracQuantError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class InvalidModelError(FracQuantError, ValueError):
    """A measure model cannot support the requested computation."""


class PrecisionError(FracQuantError):
    """The requested depth exceeds what the mass oracle resolves."""

    def __init__(self, message, achievable_tolerance=None):
        super().__init__(message)
        self.achievable_tolerance = achievable_tolerance


class ResourceError(FracQuantError, MemoryError):
    """A table would exceed the configured memory budget."""


class ConfigError(FracQuantError, ValueError):
    """One or more configuration violations; ``errors`` lists all of them."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
