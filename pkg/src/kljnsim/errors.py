"""Exception types shared across the simulator."""

__all__ = ["ConfigurationError", "ShapeMismatchError"]


class ConfigurationError(ValueError):
    """A parameter value is outside its documented domain."""


class ShapeMismatchError(ValueError):
    """Two traces or spectra that must share a grid do not."""
