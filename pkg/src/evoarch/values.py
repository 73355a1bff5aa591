"""Datatype tags and canonical lexical forms.

Set-difference deltas compare facts textually, so every literal is
normalized to one canonical spelling per datatype before it enters a
record set ("007" and "7" are the same integer, not a change).
"""

from __future__ import annotations

import re
from datetime import datetime, timezone
from decimal import Decimal, InvalidOperation
from enum import Enum

from .errors import ValueSyntaxError

__all__ = [
    "Datatype",
    "canonicalize_value",
    "parse_timestamp",
    "format_timestamp",
    "XSD_TO_DATATYPE",
    "DATATYPE_TO_XSD",
]


class Datatype(Enum):
    INTEGER = "integer"
    DECIMAL = "decimal"
    BOOLEAN = "boolean"
    STRING = "string"
    DATETIME = "datetime"
    URI_REF = "uri-ref"


_INTEGER_RE = re.compile(r"^[+-]?[0-9]+$")
_BOOLEAN_MAP = {"true": "true", "1": "true", "false": "false", "0": "false"}


def canonicalize_value(lexical: str, datatype: Datatype | str) -> str:
    """Return the canonical lexical form of ``lexical`` under ``datatype``.

    Raises ``ValueSyntaxError`` when the lexical form does not parse.
    """
    datatype = Datatype(datatype)
    if datatype is Datatype.STRING:
        return lexical
    if datatype is Datatype.INTEGER:
        if not _INTEGER_RE.match(lexical):
            raise ValueSyntaxError(f"not an integer: {lexical!r}")
        return str(int(lexical))
    if datatype is Datatype.DECIMAL:
        return _canonical_decimal(lexical)
    if datatype is Datatype.BOOLEAN:
        try:
            return _BOOLEAN_MAP[lexical.lower()]
        except KeyError:
            raise ValueSyntaxError(f"not a boolean: {lexical!r}") from None
    if datatype is Datatype.DATETIME:
        return format_timestamp(parse_timestamp(lexical))
    # URI_REF: opaque, but whitespace would corrupt the facts file format.
    if not lexical or re.search(r"\s", lexical):
        raise ValueSyntaxError(f"not a URI reference: {lexical!r}")
    return lexical


def _canonical_decimal(lexical: str) -> str:
    try:
        value = Decimal(lexical)
    except InvalidOperation:
        raise ValueSyntaxError(f"not a decimal: {lexical!r}") from None
    if not value.is_finite():
        raise ValueSyntaxError(f"not a finite decimal: {lexical!r}")
    if value == 0:
        return "0"
    normalized = value.normalize()
    # normalize() may produce exponent form (1E+2); force plain notation.
    if normalized.as_tuple().exponent > 0:
        normalized = normalized.quantize(Decimal(1))
    return format(normalized, "f")


def parse_timestamp(lexical: str) -> datetime:
    """Parse an ISO-8601 timestamp into a UTC-aware datetime.

    A trailing ``Z`` is accepted; naive timestamps are taken as UTC.
    """
    text = lexical.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        parsed = datetime.fromisoformat(text)
    except ValueError:
        raise ValueSyntaxError(f"not an ISO-8601 timestamp: {lexical!r}") from None
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed.astimezone(timezone.utc)


def format_timestamp(value: datetime) -> str:
    """UTC ISO-8601 with ``Z`` suffix, seconds always present."""
    if value.tzinfo is None:
        value = value.replace(tzinfo=timezone.utc)
    value = value.astimezone(timezone.utc)
    return value.isoformat().replace("+00:00", "Z")


_XSD = "http://www.w3.org/2001/XMLSchema#"

XSD_TO_DATATYPE = {
    _XSD + "integer": Datatype.INTEGER,
    _XSD + "int": Datatype.INTEGER,
    _XSD + "long": Datatype.INTEGER,
    _XSD + "decimal": Datatype.DECIMAL,
    _XSD + "double": Datatype.DECIMAL,
    _XSD + "float": Datatype.DECIMAL,
    _XSD + "boolean": Datatype.BOOLEAN,
    _XSD + "string": Datatype.STRING,
    _XSD + "dateTime": Datatype.DATETIME,
    _XSD + "date": Datatype.DATETIME,
    _XSD + "anyURI": Datatype.URI_REF,
}

# Canonical datatype URI per tag, used when serializing back to N-Triples.
DATATYPE_TO_XSD = {
    Datatype.INTEGER: _XSD + "integer",
    Datatype.DECIMAL: _XSD + "decimal",
    Datatype.BOOLEAN: _XSD + "boolean",
    Datatype.STRING: _XSD + "string",
    Datatype.DATETIME: _XSD + "dateTime",
    Datatype.URI_REF: _XSD + "anyURI",
}
