"""Exception hierarchy shared across the package."""


class DelayFiltError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(DelayFiltError, ValueError):
    """An input value lies outside the mathematical domain of an operation."""


class ContractError(DelayFiltError, ValueError):
    """A caller violated an interface contract (shapes, normalization, ...)."""


class ConfigError(DelayFiltError, ValueError):
    """A configuration value or file is invalid."""


class NumericError(DelayFiltError, ArithmeticError):
    """A computation produced a non-finite value where one is not allowed."""


class IdentificationError(DelayFiltError, RuntimeError):
    """Latency-probability identification could not produce an estimate."""
