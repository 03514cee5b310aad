"""Exception types shared across the package (the CLI maps them to exit codes)."""


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


class PreconditionError(ValueError):
    """An operation was asked to run outside its stated assumptions."""


class NumericalError(ArithmeticError):
    """A computation produced non-finite values."""
