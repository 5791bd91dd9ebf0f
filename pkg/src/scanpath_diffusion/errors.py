"""Shared exception types.

The CLI maps ValidationError (and plain ValueError) to exit code 1 and
everything else to exit code 2, so raising the right class here is part of
the external contract.
"""


class ValidationError(ValueError):
    """Malformed input data or inconsistent configuration."""


class CorpusFormatError(ValidationError):
    """A corpus/sentence/prediction file violates the canonical format."""

    def __init__(self, path, line_no, message):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class ConfigError(ValidationError):
    """Bad key=value config file or contradictory option values."""
