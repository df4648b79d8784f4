class InputError(ValueError):
    """Malformed or out-of-contract input data."""


class UndefinedMetricError(ArithmeticError):
    """A metric has no defined value for the given inputs (e.g. zero variance)."""
