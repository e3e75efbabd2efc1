"""Package exception types."""


class DomainError(ValueError):
    """An argument is outside the mathematical domain of an operation."""


class NumericalError(RuntimeError):
    """A numerical procedure failed to converge or produced non-finite values."""


class ConfigError(ValueError):
    """A run configuration or input file is malformed."""
