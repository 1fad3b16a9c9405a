"""Exception types shared across the package.

Plain ``ValueError`` is used for bad call arguments (shape mismatches,
out-of-range tags); the classes below exist where callers need to tell
failure categories apart, in particular the CLI exit-code mapping.
"""


class ArgboundError(Exception):
    """Base class for package-specific failures."""


class ParseError(ArgboundError, ValueError):
    """Malformed corpus or embedding file. Carries a 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(ArgboundError, ValueError):
    """Invalid run configuration (bad key, bad value, impossible split)."""


class ConsistencyError(ArgboundError, RuntimeError):
    """A function required to be deterministic returned differing values."""


class GuardError(ArgboundError, ValueError):
    """A brute-force oracle was asked for an instance too large to enumerate."""


class CheckpointError(ArgboundError, ValueError):
    """Checkpoint file unreadable or incompatible with the requested use."""


class AlignmentError(ArgboundError, ValueError):
    """Gold and predicted files disagree on tokens or structure."""


class TrainingError(ArgboundError, RuntimeError):
    """Training aborted (NaN gradient or NaN validation score)."""
