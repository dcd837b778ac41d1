"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid parameters or configuration."""


class NumericalError(ArithmeticError):
    """A computation produced non-finite or meaningless numbers."""


class ExtinctionError(NumericalError):
    """The post-selected norm vanished, so nothing can be normalized."""
