"""Errors raised by evaluation and benchmarking."""


class MissingNetError(ValueError):
    """An ablation row needs a regressor that was not supplied."""
