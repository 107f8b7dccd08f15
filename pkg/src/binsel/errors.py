"""Exception hierarchy.

Config problems map to CLI exit code 2, numerical failures to exit code 3.
"""


class BinselError(Exception):
    """Base class for all package errors."""


class ConfigError(BinselError, ValueError):
    """Invalid configuration, arguments, or input files."""


class ConstantColumnError(ConfigError):
    """A covariate column has zero sample variance and cannot be standardized."""

    def __init__(self, column: int, label: str | None = None):
        self.column = column
        self.label = label
        name = f"'{label}' (index {column})" if label else f"index {column}"
        super().__init__(f"column {name} is constant; standardization is undefined")


class NumericalError(BinselError, ArithmeticError):
    """A numerical routine failed in a way that indicates bad inputs or a bug."""


class FactorizationError(NumericalError):
    """Positive-definite factorization failed even after a single jitter retry."""

    def __init__(self, message: str, gamma=None):
        self.gamma = None if gamma is None else tuple(int(i) for i in gamma)
        if self.gamma is not None:
            message = f"{message} (included indices: {self.gamma})"
        super().__init__(message)


class RejectionCapError(NumericalError):
    """The mixing-variance rejection sampler exceeded its iteration cap."""
