"""Errors raised while generating or loading synthetic scenes."""


class PlacementError(ValueError):
    """Rejection sampling could not place an instance."""


class DatasetFormatError(ValueError):
    """A dataset record is malformed or has an unsupported format_version."""
