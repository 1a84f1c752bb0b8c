"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2,
DataFormatError -> 3, NumericalError -> 4.
"""


class ShapeError(ValueError):
    """Array shapes do not satisfy an operation's precondition."""


class DomainError(ValueError):
    """A scalar or index argument is outside its valid domain."""


class ConsistencyError(ValueError):
    """Inputs that must agree with each other do not."""


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class DataFormatError(ValueError):
    """Malformed manifest, feature file or checkpoint."""


class NumericalError(ArithmeticError):
    """Non-finite value encountered on the training path."""
