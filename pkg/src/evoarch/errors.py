"""Exception hierarchy with stable error codes.

Every domain error carries a short stable code (``E<nnn>``) that the CLI
prints verbatim, so scripts can match on codes instead of message text.
"""

from __future__ import annotations


class EvoarchError(Exception):
    """Base class for all archive errors."""

    code = "E000"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def __str__(self) -> str:
        return self.message


class InvalidIdentifierComponent(EvoarchError):
    code = "E001"


class ValueSyntaxError(EvoarchError):
    code = "E002"


class ParseError(EvoarchError):
    code = "E003"

    def __init__(self, message: str, line_no: int | None = None, **details):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message, **details)
        self.line_no = line_no


class UnsupportedConstruct(ParseError):
    code = "E004"


class ConfigMismatch(EvoarchError):
    code = "E005"


class DuplicateKey(EvoarchError):
    code = "E006"

    def __init__(self, message: str, values: tuple = (), **details):
        super().__init__(message, **details)
        self.values = tuple(values)


class AlreadyInitialized(EvoarchError):
    code = "E007"


class NotInitialized(EvoarchError):
    code = "E008"


class DatasetExists(EvoarchError):
    code = "E009"


class DatasetNotFound(EvoarchError):
    code = "E010"


class TemporalOrderViolation(EvoarchError):
    code = "E011"


class VersionNotFound(EvoarchError):
    code = "E012"


class NoVersionAtTime(EvoarchError):
    code = "E013"


class CorruptArchive(EvoarchError):
    code = "E014"


class DatasetMismatch(EvoarchError):
    code = "E015"


class InapplicableDelta(EvoarchError):
    code = "E016"

    def __init__(self, message: str, change=None, **details):
        super().__init__(message, **details)
        self.change = change


class RuleSyntaxError(EvoarchError):
    code = "E017"


class ResourceExists(EvoarchError):
    code = "E018"


class ResourceNotFound(EvoarchError):
    code = "E019"


class InvalidResourceDefinition(EvoarchError):
    code = "E020"


class VersionOrderError(EvoarchError):
    code = "E021"


class ValidationError(EvoarchError):
    """A domain type invariant was violated at construction time."""

    code = "E022"


class ArchiveLocked(EvoarchError):
    code = "E023"
