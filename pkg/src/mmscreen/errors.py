"""Exception hierarchy shared by all modules."""


class MMScreenError(Exception):
    """Base class for package errors."""


class DomainError(MMScreenError, ValueError):
    """An argument lies outside the domain of a function."""


class ConfigurationError(MMScreenError, ValueError):
    """Inconsistent shapes, sizes or settings."""


class DataError(MMScreenError, ValueError):
    """Malformed or invalid input data (files, values)."""


class DispersionError(MMScreenError, ValueError):
    """Dispersion cannot be estimated (e.g. an all-zero feature)."""


class NumericalError(MMScreenError, ArithmeticError):
    """Non-finite quasi-log-likelihood during the MM iterations."""

    def __init__(self, message, feature_id=None):
        super().__init__(message if feature_id is None else f"{message} (feature {feature_id})")
        self.feature_id = feature_id
