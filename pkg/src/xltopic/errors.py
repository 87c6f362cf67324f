"""Exception types shared across the package."""


class XltopicError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(XltopicError):
    """Inputs or settings that make the requested computation impossible."""


class ParseError(XltopicError):
    """Malformed input file; carries the offending line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CheckpointError(XltopicError):
    """Corrupt, truncated, or version-incompatible checkpoint file."""


class TrainingDiverged(XltopicError):
    """Non-finite loss during training; carries the failing step and the
    last state snapshotted before divergence."""

    def __init__(self, step, last_state=None):
        super().__init__(f"non-finite loss at step {step}")
        self.step = step
        self.last_state = last_state
