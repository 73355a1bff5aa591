"""N-Triples subset reader and writer.

Supported per line: ``<uri> <uri> (<uri> | "lexical" | "lexical"^^<dt>) .``
plus ``#`` comments, blank lines, and ``_:label`` blank nodes in subject
or object position.  Language tags, quads, and datatype URIs outside the
recognized XSD set are rejected with ``UnsupportedConstruct``; any other
malformed input raises ``ParseError``.  Both carry the line number.

Blank nodes are skolemized to deterministic opaque identifiers derived
from their document-local label (and the dataset slug when given), so a
subject keeps one stable identity within a version.  Skolemization is
one-way: serialization writes skolem ids back out as plain URI refs.

Literal lexical forms are canonicalized on the way in, so value-equal
spellings ("007" vs "7") produce identical facts.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ParseError, UnsupportedConstruct, ValueSyntaxError
from .identifiers import Identifier, Scheme, skolem_identifier
from .model import Literal, ObjectTerm, Ref
from .values import DATATYPE_TO_XSD, XSD_TO_DATATYPE, Datatype, canonicalize_value

__all__ = ["Triple", "parse_ntriples", "serialize_triples", "triple_line"]


@dataclass(frozen=True)
class Triple:
    subject: Identifier
    predicate: Identifier
    object: ObjectTerm

    def __post_init__(self):
        if self.subject.scheme not in (Scheme.URI, Scheme.OPAQUE):
            raise ValueSyntaxError(
                f"triple subject must be a URI or skolem id: {self.subject!r}"
            )
        if self.predicate.scheme is not Scheme.URI:
            raise ValueSyntaxError(
                f"triple predicate must be a URI: {self.predicate!r}"
            )


_ESCAPES = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}


class _Scanner:
    """Single-line cursor with positioned error reporting."""

    def __init__(self, line: str, line_no: int):
        self.line = line
        self.line_no = line_no
        self.pos = 0

    def error(self, message: str) -> ParseError:
        return ParseError(f"{message} (column {self.pos + 1})", line_no=self.line_no)

    def unsupported(self, message: str) -> UnsupportedConstruct:
        return UnsupportedConstruct(message, line_no=self.line_no)

    def eol(self) -> bool:
        return self.pos >= len(self.line)

    def peek(self) -> str:
        return "" if self.eol() else self.line[self.pos]

    def skip_ws(self) -> None:
        while not self.eol() and self.line[self.pos] in " \t":
            self.pos += 1

    def expect(self, ch: str) -> None:
        if self.peek() != ch:
            raise self.error(f"expected {ch!r}")
        self.pos += 1

    def read_iri(self) -> str:
        self.expect("<")
        start = self.pos
        while not self.eol() and self.line[self.pos] != ">":
            self.pos += 1
        if self.eol():
            raise self.error("unterminated IRI")
        value = self.line[start : self.pos]
        self.pos += 1
        if not value or any(c in value for c in ' "{}<|^`') or any(ord(c) <= 0x20 for c in value):
            raise self.error(f"invalid IRI <{value}>")
        return value

    def read_blank_label(self) -> str:
        self.pos += 2  # "_:"
        start = self.pos
        while not self.eol() and (self.line[self.pos].isalnum() or self.line[self.pos] in "._-"):
            self.pos += 1
        label = self.line[start : self.pos]
        if not label:
            raise self.error("empty blank node label")
        return label

    def read_quoted(self) -> str:
        self.expect('"')
        out: list[str] = []
        while True:
            if self.eol():
                raise self.error("unterminated string literal")
            ch = self.line[self.pos]
            if ch == '"':
                self.pos += 1
                return "".join(out)
            if ch == "\\":
                self.pos += 1
                if self.eol():
                    raise self.error("dangling escape")
                esc = self.line[self.pos]
                if esc in _ESCAPES:
                    out.append(_ESCAPES[esc])
                    self.pos += 1
                elif esc in "uU":
                    width = 4 if esc == "u" else 8
                    hexdigits = self.line[self.pos + 1 : self.pos + 1 + width]
                    if len(hexdigits) != width:
                        raise self.error(f"truncated \\{esc} escape")
                    try:
                        out.append(chr(int(hexdigits, 16)))
                    except ValueError:
                        raise self.error(f"invalid \\{esc} escape") from None
                    self.pos += 1 + width
                else:
                    raise self.error(f"unknown escape \\{esc}")
            else:
                out.append(ch)
                self.pos += 1


def _parse_line(scanner: _Scanner, dataset_slug: str | None) -> Triple:
    scanner.skip_ws()
    subject = _parse_subject(scanner, dataset_slug)
    scanner.skip_ws()
    if scanner.peek() != "<":
        if scanner.line[scanner.pos : scanner.pos + 2] == "_:":
            raise scanner.unsupported("blank node in predicate position")
        raise scanner.error("expected predicate IRI")
    predicate = Identifier(Scheme.URI, scanner.read_iri())
    scanner.skip_ws()
    obj = _parse_object(scanner, dataset_slug)
    scanner.skip_ws()
    scanner.expect(".")
    scanner.skip_ws()
    if not scanner.eol():
        if scanner.peek() == "#":
            pass  # trailing comment
        else:
            raise scanner.unsupported("content after statement terminator")
    return Triple(subject, predicate, obj)


def _parse_subject(scanner: _Scanner, dataset_slug: str | None) -> Identifier:
    if scanner.peek() == "<":
        return Identifier(Scheme.URI, scanner.read_iri())
    if scanner.line[scanner.pos : scanner.pos + 2] == "_:":
        return skolem_identifier(scanner.read_blank_label(), dataset_slug)
    raise scanner.error("expected subject IRI or blank node")


def _parse_object(scanner: _Scanner, dataset_slug: str | None) -> ObjectTerm:
    ch = scanner.peek()
    if ch == "<":
        return Ref(Identifier(Scheme.URI, scanner.read_iri()))
    if scanner.line[scanner.pos : scanner.pos + 2] == "_:":
        return Ref(skolem_identifier(scanner.read_blank_label(), dataset_slug))
    if ch != '"':
        raise scanner.error("expected object term")
    lexical = scanner.read_quoted()
    datatype = Datatype.STRING
    if scanner.peek() == "@":
        raise scanner.unsupported("language-tagged literals are not supported")
    if scanner.line[scanner.pos : scanner.pos + 2] == "^^":
        scanner.pos += 2
        datatype_uri = scanner.read_iri()
        try:
            datatype = XSD_TO_DATATYPE[datatype_uri]
        except KeyError:
            raise scanner.unsupported(
                f"unrecognized datatype <{datatype_uri}>"
            ) from None
    try:
        lexical = canonicalize_value(lexical, datatype)
    except ValueSyntaxError as exc:
        raise ValueSyntaxError(f"line {scanner.line_no}: {exc.message}") from None
    return Literal(lexical, datatype)


def parse_ntriples(text: str, dataset_slug: str | None = None) -> list[Triple]:
    """Parse N-Triples text into triples, one per non-blank non-comment line."""
    triples = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        triples.append(_parse_line(_Scanner(raw, line_no), dataset_slug))
    return triples


def _escape_literal(text: str) -> str:
    return (
        text.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\r", "\\r")
        .replace("\t", "\\t")
    )


def triple_line(subject: Identifier, predicate: Identifier, obj: ObjectTerm) -> str:
    if isinstance(obj, Ref):
        rendered = f"<{obj.target.canonical_value}>"
    elif obj.datatype is Datatype.STRING:
        rendered = f'"{_escape_literal(obj.lexical)}"'
    else:
        rendered = f'"{_escape_literal(obj.lexical)}"^^<{DATATYPE_TO_XSD[obj.datatype]}>'
    return f"<{subject.canonical_value}> <{predicate.canonical_value}> {rendered} ."


def serialize_triples(triples: list[Triple]) -> str:
    lines = [triple_line(t.subject, t.predicate, t.object) for t in triples]
    return "".join(line + "\n" for line in lines)
