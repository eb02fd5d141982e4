"""Exception hierarchy shared by all sgeq modules.

Each class carries the CLI exit code it maps to, so the command-line front
end never needs a lookup table of its own.
"""


class SgeqError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


class ConfigError(SgeqError, ValueError):
    """Invalid configuration (window spec, quantizer settings, CLI flags)."""

    exit_code = 2


class DataError(SgeqError, ValueError):
    """Bad input data: empty signals, non-finite values, too little data."""

    exit_code = 3


class ArgumentError(DataError):
    """A function argument violates its documented precondition."""


class IngestionError(DataError):
    """An audio file could not be ingested (format, channels, sample rate)."""


class TrainingError(DataError):
    """Codebook training could not run on the supplied data."""


class CorruptStreamError(SgeqError, ValueError):
    """An encoded stream or model file failed validation.

    Parameters
    ----------
    field : str
        Name of the failing header field or payload element.
    message : str
        Human readable description.
    """

    exit_code = 4

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class MagicError(CorruptStreamError):
    pass


class VersionError(CorruptStreamError):
    pass


class TruncationError(CorruptStreamError):
    pass


class TokenRangeError(CorruptStreamError):
    pass


class SerializationError(SgeqError, ValueError):
    """A stream object violates the invariants required to serialize it."""

    exit_code = 4
