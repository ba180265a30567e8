"""Errors raised by polygon construction and polygon operations."""


class GeometryError(ValueError):
    """Invalid polygon or degenerate geometric input."""


class CollapseError(GeometryError):
    """An inward offset consumed the whole polygon."""
