"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class ParameterError(ValueError):
    """A numeric argument lies outside its documented domain."""


class ValidationError(ValueError):
    """Structured input violates a declared invariant."""


class TapeError(RuntimeError):
    """Gradient tape used outside its lifecycle (e.g. backward run twice)."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values."""


class ConfigError(ValueError):
    """Experiment configuration is missing, malformed, or inconsistent."""
