"""Exception types shared across the toolkit.

The CLI maps ``SautiError`` subclasses to exit code 1 (bad input or
configuration) and everything else to exit code 2 (runtime failure).
"""


class SautiError(Exception):
    """Base class for all toolkit errors caused by invalid input."""


class FormatError(SautiError):
    """A byte stream or file does not match its declared container format."""


class UnsupportedFormatError(SautiError):
    """The container is well-formed but uses an unsupported encoding
    (e.g. multi-channel or non-16-bit WAV)."""


class DegenerateSignalError(SautiError):
    """An audio operation received a signal it cannot meaningfully process
    (all-zero clip, clip entirely below the silence threshold)."""


class ArgumentError(SautiError):
    """An operation was called with out-of-range arguments."""


class ValidationError(SautiError):
    """A manifest record violates its invariants."""


class InsufficientSpeakersError(SautiError):
    """A class has too few distinct speakers for a speaker-disjoint split."""


class ConfigurationError(SautiError):
    """A configuration is internally inconsistent (e.g. a mel filterbank
    resolution that produces empty filters)."""


class ShapeError(SautiError):
    """Tensor dimensions do not match the model."""


class NumericError(SautiError):
    """A computation produced or received non-finite values."""
