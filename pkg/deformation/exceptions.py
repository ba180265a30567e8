"""Errors raised by regressor training and checkpoint handling."""


class TrainingDiverged(RuntimeError):
    """The training loss became non-finite; `report` holds the history so far."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class CheckpointError(ValueError):
    """A checkpoint file is malformed or has an unsupported format_version."""
