"""Fault hierarchy for the extractor CLI.

Every ExtractorError is a diagnosed input, table, or model problem and maps
to exit code 2; anything else escaping to the CLI is an internal fault
(exit 3).
"""

from __future__ import annotations


class ExtractorError(Exception):
    pass


class DatasetError(ExtractorError):
    """Unreadable or malformed dataset input."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = path if line is None else f"{path}:{line}"
            prefix += ": "
        super().__init__(prefix + message)


class TableError(ExtractorError):
    """Bad IDF table file."""


class ModelError(ExtractorError):
    """Model, tokenizer, or auxiliary backend unavailable or misbehaving."""


class UsageError(ExtractorError):
    """Bad flags or flag combinations."""
