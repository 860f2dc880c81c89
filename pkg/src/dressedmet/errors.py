"""Exception types shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(ToolkitError, ValueError):
    """Invalid input: dimension mismatch, broken invariant, malformed data."""


class NumericalError(ToolkitError, RuntimeError):
    """A numerical procedure failed to reach its certified accuracy."""
