from typing import Optional

from src.geometry.types import ScanPlanError


class FormatError(ScanPlanError):
    """A file could not be read or written in the expected format."""
    pass


class ParseError(FormatError):
    """Malformed input; ``offset`` is a 1-based line (text) or a byte offset (binary)."""

    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)


class UnsupportedFeature(FormatError):
    pass


class SchemaError(FormatError):
    def __init__(self, key: str, message: str = ""):
        self.key = key
        super().__init__(f"{key}: {message}" if message else f"invalid or missing key: {key}")
