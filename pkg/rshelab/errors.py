class ConfigError(ValueError):
    """A configuration value is missing, malformed or outside its allowed range.

    The message names the offending key.
    """


class NumericalError(ArithmeticError):
    """A computation produced non-finite values or a hard verdict failed."""
