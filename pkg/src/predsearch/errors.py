"""Exception types shared across the package."""


class PredsearchError(Exception):
    """Base class for all package-specific errors."""


class ParseError(PredsearchError):
    """A file could not be parsed; the message names the line or field."""


class ValidationError(PredsearchError):
    """Input data violates a structural invariant."""


class DimensionError(PredsearchError):
    """Vector or matrix sizes do not line up."""


class NumericalError(PredsearchError):
    """The LP engine lost numerical stability beyond its retry budget."""


class GenerationError(PredsearchError):
    """An instance generator produced (or would produce) an invalid instance."""


class ConfigError(PredsearchError):
    """A configuration file or CLI configuration is invalid."""
