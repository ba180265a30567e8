"""Errors raised while resolving run configuration."""


class ConfigError(ValueError):
    """A config file or flag value is unknown, mistyped or out of range."""
