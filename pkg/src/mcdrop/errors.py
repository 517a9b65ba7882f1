"""Exception types shared across the toolkit."""


class McdropError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(McdropError, ValueError):
    """Bad argument or inconsistent input data."""


class DimensionError(ValidationError):
    """Array shape does not match what the operation requires."""


class StateError(McdropError, RuntimeError):
    """Operation called in the wrong order (e.g. backward before forward)."""


class TrainingDivergedError(McdropError, RuntimeError):
    """Loss became non-finite during optimisation."""

    def __init__(self, message, epoch=None, batch=None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch


class ParseError(ValidationError):
    """Malformed text input; carries the offending line number when known."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class FormatError(ValidationError):
    """Binary file does not match the expected format."""


class CheckpointFormatError(FormatError):
    """Checkpoint document has an unknown or incompatible format_version."""


class OracleError(McdropError, RuntimeError):
    """Label oracle failed or timed out; the requesting step must not commit."""
