"""Exceptions raised by scoutpy. Each one derives from a builtin exception so
    callers can catch either the specific or the generic type."""


class ShapeError(ValueError):
    """An operand or layer received an input of the wrong shape."""


class NonFiniteError(FloatingPointError):
    """A tensor op, gradient or loss produced NaN or infinity."""


class ConfigError(ValueError):
    """A run configuration holds an unknown key or an out-of-range value."""

    def __init__(self, key, constraint):
        self.key = key
        self.constraint = constraint
        super().__init__("config key '%s': %s" % (key, constraint))


class LayoutError(ValueError):
    """A layout file could not be parsed. row and col are 0-based."""

    def __init__(self, row, col, message):
        self.row = row
        self.col = col
        super().__init__("layout row %d, column %d: %s" % (row + 1, col + 1, message))


class EnvironmentStepError(ValueError):
    """An environment received an action id it does not know."""
