"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Array shapes are inconsistent with each other."""


class DegenerateVarianceError(ValueError):
    """A correlation input has zero variance."""


class ConfigError(ValueError):
    """Invalid configuration or parameter values."""


class CapacityError(ValueError):
    """A request exceeds a hard size limit."""
