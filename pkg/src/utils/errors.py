"""Exception hierarchy shared by every layer."""
from pathlib import Path
from typing import Optional, Union


class LGAError(Exception):
    """Base exception for the matching pipeline."""
    pass


class InvalidArgumentError(LGAError, ValueError):
    """Raised when an argument violates an operation's precondition."""
    pass


class ConfigError(LGAError):
    """Raised when run configuration or environment is incomplete."""
    pass


class DataError(LGAError):
    """Base for errors caused by input data rather than arguments."""
    pass


class InvalidDataError(DataError):
    """Raised for non-finite or malformed feature values."""
    pass


class DegenerateFeatureError(DataError):
    """Raised when a cluster mean has zero norm and cosine is undefined."""

    def __init__(self, message: str, start: int, end: int):
        super().__init__(message)
        self.start = start
        self.end = end


class DegeneratePhaseError(DataError):
    """Raised when a prototype phase holds no rows."""
    pass


class StoreError(DataError):
    """Base for feature-store file errors; carries path and byte offset."""

    def __init__(self, message: str, path: Optional[Union[str, Path]] = None, offset: Optional[int] = None):
        location = ""
        if path is not None:
            location = f" ({path}"
            location += f" @ offset {offset})" if offset is not None else ")"
        super().__init__(message + location)
        self.path = str(path) if path is not None else None
        self.offset = offset


class CorruptFileError(StoreError):
    """Magic bytes or version do not match the expected format."""
    pass


class TruncatedFileError(StoreError):
    """File ends before the declared payload."""
    pass


class MissingBlobError(StoreError):
    """A manifest references a blob that does not exist."""
    pass


class DimensionMismatchError(StoreError):
    """A blob's shape disagrees with the manifest or store dimension."""
    pass


class DanglingReferenceError(StoreError):
    """A manifest entry references an unknown class id."""

    def __init__(self, message: str, ref_id: object, path: Optional[Union[str, Path]] = None):
        super().__init__(message, path)
        self.ref_id = ref_id


class NumericError(LGAError):
    """Raised when an intermediate result stops being finite."""
    pass


class ResponseParsingError(LGAError):
    """Error parsing LLM response; keeps the raw reply."""

    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


class LLMError(LGAError):
    """Base for LLM endpoint failures."""
    pass


class LLMAuthenticationError(LLMError):
    """The endpoint rejected the credentials."""
    pass


class LLMTransportError(LLMError):
    """Network failure or timeout that persisted through every retry."""
    pass


class LLMRequestError(LLMError):
    """Non-retryable HTTP error other than authentication."""
    pass


class EpisodeError(LGAError):
    """Wraps a failure inside one episode with its index and seed."""

    def __init__(self, message: str, index: int, seed: int):
        super().__init__(f"Episode {index} (seed {seed}) failed: {message}")
        self.index = index
        self.seed = seed
