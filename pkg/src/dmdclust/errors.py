"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a precondition (shapes, ranges, file formats)."""


class NumericalError(ValueError):
    """The numerics cannot proceed (zero data, defective operator, ...)."""
