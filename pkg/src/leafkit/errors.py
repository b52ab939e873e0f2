"""Exception types shared across the toolkit."""


class LeafkitError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgumentError(LeafkitError, ValueError):
    """An argument violates a documented precondition."""


class DimensionError(LeafkitError, ValueError):
    """Shapes or dimensions of two values do not line up."""


class ValidationError(LeafkitError, ValueError):
    """A composite input (manifest, rule set, plan) failed validation."""


class ParseError(LeafkitError, ValueError):
    """A file could not be parsed; message names the offending location."""
