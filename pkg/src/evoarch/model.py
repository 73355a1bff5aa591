"""Core domain types: records, record sets, schemas, versions.

Everything here is an immutable value object; a committed version is a
``(SchemaVersion, RecordSet)`` pair plus temporal and provenance
metadata.

Facts file format (the content-hash preimage)
---------------------------------------------
One fact per line, five tab-separated fields::

    subject-id TAB predicate-id TAB kind(lit|ref) TAB lexical TAB datatype

Lines are sorted bytewise and each ends with a newline; the empty record
set is the empty byte string.  Identifier fields can never contain tabs
or newlines (enforced at construction); the lexical field is backslash
escaped (``\\t \\n \\r \\\\``).  ``ref`` facts carry the target identifier
in the lexical field and ``-`` as datatype.

Schema file format
------------------
One schema object per line, six tab-separated fields::

    id TAB kind(class|property) TAB source-construct TAB domain TAB range-kind(class|datatype|-) TAB range

with ``-`` for absent domain/range.  Lines sorted bytewise.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, NamedTuple, Union

from datetime import datetime

from .errors import CorruptArchive, ValidationError
from .identifiers import Identifier, Scheme, Scope, classify_value
from .values import Datatype, format_timestamp

__all__ = [
    "RDF_TYPE",
    "RDFS_DOMAIN",
    "RDFS_RANGE",
    "RDFS_RESOURCE",
    "TemporalInterval",
    "TemporalAnnotation",
    "ProvenanceInfo",
    "SourceModel",
    "Literal",
    "Ref",
    "ObjectTerm",
    "RecordAttribute",
    "Record",
    "RecordSet",
    "Fact",
    "hash_record_set",
    "SchemaKind",
    "SourceConstruct",
    "SchemaObject",
    "SchemaVersion",
    "DiachronicDataset",
    "DatasetInstantiation",
]

# Built-in vocabulary: type assertions and schema-level definitions use
# the standard RDF/RDFS predicates for every source model.
RDF_TYPE = Identifier(Scheme.URI, "http://www.w3.org/1999/02/22-rdf-syntax-ns#type")
RDFS_DOMAIN = Identifier(Scheme.URI, "http://www.w3.org/2000/01/rdf-schema#domain")
RDFS_RANGE = Identifier(Scheme.URI, "http://www.w3.org/2000/01/rdf-schema#range")
RDFS_RESOURCE = Identifier(Scheme.URI, "http://www.w3.org/2000/01/rdf-schema#Resource")


class SourceModel(Enum):
    RELATIONAL = "relational"
    MULTIDIMENSIONAL = "multidimensional"
    RDF = "rdf"


@dataclass(frozen=True)
class TemporalInterval:
    """Closed-start, open-end interval; ``end=None`` means still current."""

    start: datetime
    end: datetime | None = None

    def __post_init__(self):
        if self.end is not None and self.start > self.end:
            raise ValidationError(
                f"interval start {format_timestamp(self.start)} after end "
                f"{format_timestamp(self.end)}"
            )

    def contains(self, t: datetime) -> bool:
        return self.start <= t and (self.end is None or t < self.end)

    def overlaps(self, other: "TemporalInterval") -> bool:
        starts_before_other_ends = other.end is None or self.start < other.end
        other_starts_before_self_ends = self.end is None or other.start < self.end
        return starts_before_other_ends and other_starts_before_self_ends


@dataclass(frozen=True)
class TemporalAnnotation:
    transaction_time: TemporalInterval
    valid_time: TemporalInterval | None = None


@dataclass(frozen=True)
class ProvenanceInfo:
    agent: str
    process: str
    source: str
    recorded_at: datetime
    annotation: str | None = None

    def __post_init__(self):
        if not self.agent:
            raise ValidationError("provenance agent must be non-empty")
        if not self.source:
            raise ValidationError("provenance source must be non-empty")


@dataclass(frozen=True)
class Literal:
    """A typed literal; the lexical form is expected to be canonical."""

    lexical: str
    datatype: Datatype


@dataclass(frozen=True)
class Ref:
    target: Identifier


ObjectTerm = Union[Literal, Ref]


@dataclass(frozen=True)
class RecordAttribute:
    """One (predicate, object) fact within a record."""

    predicate: Identifier
    object: ObjectTerm


@dataclass(frozen=True)
class Record:
    """The fact bag of a single subject; 1:1 with subjects in a record set."""

    record_id: Identifier
    subject: Identifier
    attributes: frozenset[RecordAttribute]

    @classmethod
    def of(
        cls,
        subject: Identifier,
        attributes: Iterable[RecordAttribute],
        record_id: Identifier | None = None,
    ) -> "Record":
        return cls(record_id or subject, subject, frozenset(attributes))


class Fact(NamedTuple):
    """The five facts-file fields of one fact, in canonical string form."""

    subject: str
    predicate: str
    kind: str  # "lit" | "ref"
    lexical: str
    datatype: str

    def line(self) -> str:
        return "\t".join(
            (self.subject, self.predicate, self.kind, _escape(self.lexical), self.datatype)
        )


def _escape(text: str) -> str:
    return (
        text.replace("\\", "\\\\")
        .replace("\t", "\\t")
        .replace("\n", "\\n")
        .replace("\r", "\\r")
    )


def _unescape(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\" and i + 1 < len(text):
            nxt = text[i + 1]
            out.append({"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}.get(nxt, nxt))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def attribute_fact(subject: Identifier, attr: RecordAttribute) -> Fact:
    if isinstance(attr.object, Literal):
        return Fact(
            subject.canonical_value,
            attr.predicate.canonical_value,
            "lit",
            attr.object.lexical,
            attr.object.datatype.value,
        )
    return Fact(
        subject.canonical_value,
        attr.predicate.canonical_value,
        "ref",
        attr.object.target.canonical_value,
        "-",
    )


def fact_to_attribute(fact: Fact) -> tuple[Identifier, RecordAttribute]:
    """Rebuild the (subject, attribute) pair a fact denotes."""
    subject = classify_value(fact.subject)
    predicate = classify_value(fact.predicate)
    obj: ObjectTerm
    if fact.kind == "ref":
        obj = Ref(classify_value(fact.lexical))
    elif fact.kind == "lit":
        obj = Literal(fact.lexical, Datatype(fact.datatype))
    else:
        raise CorruptArchive(f"unknown fact kind {fact.kind!r}")
    return subject, RecordAttribute(predicate, obj)


def parse_fact_line(line: str, line_no: int | None = None) -> Fact:
    parts = line.split("\t")
    if len(parts) != 5:
        where = f" at line {line_no}" if line_no else ""
        raise CorruptArchive(f"malformed facts line{where}: {line!r}")
    subject, predicate, kind, lexical, datatype = parts
    return Fact(subject, predicate, kind, _unescape(lexical), datatype)


@dataclass(frozen=True)
class RecordSet:
    """A set of records keyed by subject, with a deterministic content hash."""

    records: tuple[Record, ...]
    content_hash: str

    @classmethod
    def from_records(cls, records: Iterable[Record]) -> "RecordSet":
        ordered = sorted(records, key=lambda r: r.subject.canonical_value)
        subjects = [r.subject.canonical_value for r in ordered]
        if len(set(subjects)) != len(subjects):
            dupes = sorted({s for s in subjects if subjects.count(s) > 1})
            raise ValidationError(f"duplicate record subjects: {dupes}")
        rs = cls(tuple(ordered), "")
        object.__setattr__(rs, "content_hash", hash_record_set(rs))
        return rs

    @classmethod
    def from_facts(cls, facts: Iterable[Fact]) -> "RecordSet":
        by_subject: dict[str, list[Fact]] = {}
        for fact in facts:
            by_subject.setdefault(fact.subject, []).append(fact)
        records = []
        for subject_value in sorted(by_subject):
            attrs = []
            subject = None
            for fact in by_subject[subject_value]:
                subject, attr = fact_to_attribute(fact)
                attrs.append(attr)
            records.append(Record.of(subject, attrs))
        return cls.from_records(records)

    @classmethod
    def empty(cls) -> "RecordSet":
        return cls.from_records(())

    def facts(self) -> frozenset[Fact]:
        cached = self.__dict__.get("_facts")
        if cached is None:
            cached = frozenset(
                attribute_fact(record.subject, attr)
                for record in self.records
                for attr in record.attributes
            )
            object.__setattr__(self, "_facts", cached)
        return cached

    def record_for(self, subject_value: str) -> Record | None:
        for record in self.records:
            if record.subject.canonical_value == subject_value:
                return record
        return None

    def to_text(self) -> str:
        """The canonical facts file content (also the hashing preimage)."""
        lines = sorted(fact.line() for fact in self.facts())
        return "".join(line + "\n" for line in lines)

    @classmethod
    def from_text(cls, text: str) -> "RecordSet":
        facts = []
        for line_no, line in enumerate(text.splitlines(), start=1):
            facts.append(parse_fact_line(line, line_no))
        return cls.from_facts(facts)


def hash_record_set(rs: RecordSet) -> str:
    """SHA-256 over the sorted canonical fact lines; permutation-invariant."""
    lines = sorted(fact.line() for fact in rs.facts())
    digest = hashlib.sha256()
    for line in lines:
        digest.update(line.encode("utf-8"))
        digest.update(b"\n")
    return digest.hexdigest()


class SchemaKind(Enum):
    CLASS = "class"
    PROPERTY = "property"


class SourceConstruct(Enum):
    TABLE = "table"
    COLUMN = "column"
    DIMENSION = "dimension"
    MEASURE = "measure"
    ATTRIBUTE = "attribute"
    RDF_CLASS = "rdf-class"
    RDF_PROPERTY = "rdf-property"


@dataclass(frozen=True)
class SchemaObject:
    """A class, or a property with its domain and range."""

    id: Identifier
    kind: SchemaKind
    source_construct: SourceConstruct
    domain_class: Identifier | None = None
    range: Identifier | Datatype | None = None

    def __post_init__(self):
        if self.kind is SchemaKind.CLASS and (
            self.domain_class is not None or self.range is not None
        ):
            raise ValidationError(
                f"class {self.id.canonical_value} must not carry domain or range"
            )
        if self.kind is SchemaKind.PROPERTY and self.range is None:
            raise ValidationError(
                f"property {self.id.canonical_value} must carry a range"
            )

    def line(self) -> str:
        domain = self.domain_class.canonical_value if self.domain_class else "-"
        if self.range is None:
            range_kind, range_value = "-", "-"
        elif isinstance(self.range, Datatype):
            range_kind, range_value = "datatype", self.range.value
        else:
            range_kind, range_value = "class", self.range.canonical_value
        return "\t".join(
            (
                self.id.canonical_value,
                self.kind.value,
                self.source_construct.value,
                domain,
                range_kind,
                range_value,
            )
        )

    @classmethod
    def from_line(cls, line: str, line_no: int | None = None) -> "SchemaObject":
        parts = line.split("\t")
        if len(parts) != 6:
            where = f" at line {line_no}" if line_no else ""
            raise CorruptArchive(f"malformed schema line{where}: {line!r}")
        id_value, kind, source, domain, range_kind, range_value = parts
        range_: Identifier | Datatype | None
        if range_kind == "-":
            range_ = None
        elif range_kind == "datatype":
            range_ = Datatype(range_value)
        elif range_kind == "class":
            range_ = classify_value(range_value)
        else:
            raise CorruptArchive(f"unknown schema range kind {range_kind!r}")
        return cls(
            id=classify_value(id_value),
            kind=SchemaKind(kind),
            source_construct=SourceConstruct(source),
            domain_class=None if domain == "-" else classify_value(domain),
            range=range_,
        )


@dataclass(frozen=True)
class SchemaVersion:
    """An immutable set of schema objects with a content-addressed id."""

    id: Identifier
    objects: frozenset[SchemaObject]

    @classmethod
    def of(cls, objects: Iterable[SchemaObject]) -> "SchemaVersion":
        objects = frozenset(objects)
        ids = {obj.id for obj in objects}
        if len(ids) != len(objects):
            raise ValidationError("schema objects must have distinct identifiers")
        digest = hashlib.sha256(cls._text(objects).encode("utf-8")).hexdigest()
        schema_id = Identifier(
            Scheme.OPAQUE, f"schema:{digest[:16]}", Scope.VERSION_SPECIFIC
        )
        return cls(schema_id, objects)

    @staticmethod
    def _text(objects: frozenset[SchemaObject]) -> str:
        return "".join(line + "\n" for line in sorted(obj.line() for obj in objects))

    def to_text(self) -> str:
        return self._text(self.objects)

    @classmethod
    def from_text(cls, text: str) -> "SchemaVersion":
        objects = [
            SchemaObject.from_line(line, line_no)
            for line_no, line in enumerate(text.splitlines(), start=1)
        ]
        return cls.of(objects)

    def object_for(self, id_value: str) -> SchemaObject | None:
        for obj in self.objects:
            if obj.id.canonical_value == id_value:
                return obj
        return None


@dataclass(frozen=True)
class DiachronicDataset:
    """Time-agnostic identity of a dataset, linked to its version history."""

    diachronic_id: Identifier
    title: str
    source_model: SourceModel
    version_ids: tuple[Identifier, ...] = ()


@dataclass(frozen=True)
class DatasetInstantiation:
    """One immutable, time-stamped version of a diachronic dataset."""

    version_id: Identifier
    diachronic_id: Identifier
    temporal: TemporalAnnotation
    provenance: ProvenanceInfo
    schema_version_id: Identifier
    record_set_hash: str

    @property
    def short_name(self) -> str:
        return self.version_id.canonical_value.rsplit("/", 1)[-1]
