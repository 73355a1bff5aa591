"""Low-level deltas between versions: compute, apply, invert, serialize.

A version is treated as a set of facts plus a set of schema objects.
The delta between two versions lists adds (present only in the newer)
and deletes (present only in the older).  A subject present in only one
version contributes a single record-level op carrying its whole fact
bag; subjects present in both contribute attribute-level ops.

Change-set file format (``.cs``)
--------------------------------
Header line ``from TAB to`` (version ids, ``-`` when unknown), then one
line per low-level change, sorted bytewise::

    op TAB subject TAB predicate TAB kind TAB lexical TAB datatype

Record-level ops repeat one line per carried attribute (same op and
subject, so the group stays contiguous under the sort).  Schema ops
reuse the six fields as::

    op TAB object-id TAB class|property TAB source-construct TAB domain|- TAB range-spec

where range-spec is ``class:<id>``, ``datatype:<tag>`` or ``-``.  The
high-level section follows a ``==HL==`` line, one change per line::

    name TAB context-ids(|-joined) TAB constituent-line-numbers(,-joined) [TAB annotation]

``|`` can never occur inside an identifier (it is percent-encoded on
minting and rejected by the N-Triples reader), which makes it a safe
join character.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Union

from .errors import (
    CorruptArchive,
    DatasetMismatch,
    InapplicableDelta,
    ValidationError,
)
from .identifiers import Identifier, classify_value
from .model import (
    DatasetInstantiation,
    Fact,
    Record,
    RecordAttribute,
    RecordSet,
    SchemaObject,
    SchemaVersion,
    attribute_fact,
    fact_to_attribute,
    parse_fact_line,
)

__all__ = [
    "ChangeOp",
    "LowLevelChange",
    "HighLevelChange",
    "ChangeSet",
    "Version",
    "compute_delta",
    "apply_delta",
    "invert_delta",
    "changeset_to_text",
    "changeset_from_text",
]

Version = tuple[SchemaVersion, RecordSet]


class ChangeOp(Enum):
    ADD_ATTRIBUTE = "add-attribute"
    DELETE_ATTRIBUTE = "delete-attribute"
    ADD_RECORD = "add-record"
    DELETE_RECORD = "delete-record"
    ADD_SCHEMA_OBJECT = "add-schema-object"
    DELETE_SCHEMA_OBJECT = "delete-schema-object"


_INVERSE = {
    ChangeOp.ADD_ATTRIBUTE: ChangeOp.DELETE_ATTRIBUTE,
    ChangeOp.DELETE_ATTRIBUTE: ChangeOp.ADD_ATTRIBUTE,
    ChangeOp.ADD_RECORD: ChangeOp.DELETE_RECORD,
    ChangeOp.DELETE_RECORD: ChangeOp.ADD_RECORD,
    ChangeOp.ADD_SCHEMA_OBJECT: ChangeOp.DELETE_SCHEMA_OBJECT,
    ChangeOp.DELETE_SCHEMA_OBJECT: ChangeOp.ADD_SCHEMA_OBJECT,
}

RECORD_OPS = (ChangeOp.ADD_RECORD, ChangeOp.DELETE_RECORD)
ATTRIBUTE_OPS = (ChangeOp.ADD_ATTRIBUTE, ChangeOp.DELETE_ATTRIBUTE)
SCHEMA_OPS = (ChangeOp.ADD_SCHEMA_OBJECT, ChangeOp.DELETE_SCHEMA_OBJECT)
ADD_OPS = (ChangeOp.ADD_ATTRIBUTE, ChangeOp.ADD_RECORD)
DELETE_OPS = (ChangeOp.DELETE_ATTRIBUTE, ChangeOp.DELETE_RECORD)

Payload = Union[RecordAttribute, Record, SchemaObject]


@dataclass(frozen=True)
class LowLevelChange:
    op: ChangeOp
    payload: Payload
    subject: Identifier | None = None

    def __post_init__(self):
        if self.op in ATTRIBUTE_OPS:
            if not isinstance(self.payload, RecordAttribute) or self.subject is None:
                raise ValidationError(f"{self.op.value} needs a subject and attribute")
        elif self.op in RECORD_OPS:
            if not isinstance(self.payload, Record):
                raise ValidationError(f"{self.op.value} needs a record payload")
            if not self.payload.attributes:
                raise ValidationError(f"{self.op.value} payload carries no attributes")
        elif not isinstance(self.payload, SchemaObject):
            raise ValidationError(f"{self.op.value} needs a schema object payload")

    def lines(self) -> list[str]:
        if self.op in ATTRIBUTE_OPS:
            fact = attribute_fact(self.subject, self.payload)
            return [f"{self.op.value}\t" + fact.line()]
        if self.op in RECORD_OPS:
            record = self.payload
            fact_lines = sorted(
                attribute_fact(record.subject, attr).line()
                for attr in record.attributes
            )
            return [f"{self.op.value}\t{line}" for line in fact_lines]
        obj = self.payload
        if obj.range is None:
            range_spec = "-"
        elif isinstance(obj.range, Identifier):
            range_spec = f"class:{obj.range.canonical_value}"
        else:
            range_spec = f"datatype:{obj.range.value}"
        domain = obj.domain_class.canonical_value if obj.domain_class else "-"
        return [
            "\t".join(
                (
                    self.op.value,
                    obj.id.canonical_value,
                    obj.kind.value,
                    obj.source_construct.value,
                    domain,
                    range_spec,
                )
            )
        ]

    def sort_key(self) -> tuple[str, ...]:
        return tuple(self.lines())

    def facts(self) -> frozenset[Fact]:
        """The facts this change adds or removes (empty for schema ops)."""
        if self.op in ATTRIBUTE_OPS:
            return frozenset({attribute_fact(self.subject, self.payload)})
        if self.op in RECORD_OPS:
            record = self.payload
            return frozenset(
                attribute_fact(record.subject, attr) for attr in record.attributes
            )
        return frozenset()


@dataclass(frozen=True)
class HighLevelChange:
    """A named composition of low-level changes matched by a rule."""

    name: str
    constituents: tuple[LowLevelChange, ...]
    context: tuple[Identifier, ...]
    annotation: str | None = None

    def __post_init__(self):
        if not self.constituents:
            raise ValidationError("high-level change needs at least one constituent")


@dataclass(frozen=True)
class ChangeSet:
    dataset_id: Identifier | None
    from_version: Identifier | None
    to_version: Identifier | None
    low_level: tuple[LowLevelChange, ...]
    high_level: tuple[HighLevelChange, ...] = ()

    def __post_init__(self):
        object.__setattr__(
            self, "low_level", tuple(sorted(self.low_level, key=LowLevelChange.sort_key))
        )
        added: set[Fact] = set()
        deleted: set[Fact] = set()
        for change in self.low_level:
            target = added if change.op in ADD_OPS else deleted
            if change.op not in SCHEMA_OPS:
                target |= change.facts()
        overlap = added & deleted
        if overlap:
            raise ValidationError(
                f"facts appear in both adds and deletes: {sorted(overlap)[:3]}"
            )
        members = set(self.low_level)
        for hl in self.high_level:
            for constituent in hl.constituents:
                if constituent not in members:
                    raise ValidationError(
                        f"high-level change {hl.name} references a non-member constituent"
                    )

    def is_empty(self) -> bool:
        return not self.low_level

    def with_high_level(self, high_level: Iterable[HighLevelChange]) -> "ChangeSet":
        return ChangeSet(
            self.dataset_id,
            self.from_version,
            self.to_version,
            self.low_level,
            tuple(high_level),
        )


def _group_records(rs: RecordSet) -> dict[str, Record]:
    return {record.subject.canonical_value: record for record in rs.records}


def compute_delta(
    v1: Version,
    v2: Version,
    *,
    from_inst: DatasetInstantiation | None = None,
    to_inst: DatasetInstantiation | None = None,
) -> ChangeSet:
    """Set-difference delta from ``v1`` to ``v2``.

    When both instantiations are supplied they must belong to the same
    diachronic dataset.
    """
    dataset_id = None
    if from_inst is not None and to_inst is not None:
        if from_inst.diachronic_id != to_inst.diachronic_id:
            raise DatasetMismatch(
                f"{from_inst.version_id.canonical_value} and "
                f"{to_inst.version_id.canonical_value} belong to different datasets"
            )
        dataset_id = from_inst.diachronic_id

    schema1, rs1 = v1
    schema2, rs2 = v2
    changes: list[LowLevelChange] = []

    records1 = _group_records(rs1)
    records2 = _group_records(rs2)
    for subject_value, record in records2.items():
        if subject_value not in records1:
            changes.append(LowLevelChange(ChangeOp.ADD_RECORD, record))
    for subject_value, record in records1.items():
        if subject_value not in records2:
            changes.append(LowLevelChange(ChangeOp.DELETE_RECORD, record))
    for subject_value in records1.keys() & records2.keys():
        old = records1[subject_value]
        new = records2[subject_value]
        for attr in new.attributes - old.attributes:
            changes.append(
                LowLevelChange(ChangeOp.ADD_ATTRIBUTE, attr, subject=new.subject)
            )
        for attr in old.attributes - new.attributes:
            changes.append(
                LowLevelChange(ChangeOp.DELETE_ATTRIBUTE, attr, subject=old.subject)
            )

    for obj in schema2.objects - schema1.objects:
        changes.append(LowLevelChange(ChangeOp.ADD_SCHEMA_OBJECT, obj))
    for obj in schema1.objects - schema2.objects:
        changes.append(LowLevelChange(ChangeOp.DELETE_SCHEMA_OBJECT, obj))

    return ChangeSet(
        dataset_id=dataset_id,
        from_version=from_inst.version_id if from_inst else None,
        to_version=to_inst.version_id if to_inst else None,
        low_level=tuple(changes),
    )


def apply_delta(base: Version, cs: ChangeSet) -> Version:
    """Apply ``cs`` as an edit script over ``base``.

    Every delete must exist in the base and no add may already be
    present; otherwise ``InapplicableDelta`` reports the offending
    change.
    """
    schema, rs = base
    facts = set(rs.facts())
    subjects = {record.subject.canonical_value for record in rs.records}
    by_subject = _group_records(rs)

    for change in cs.low_level:
        if change.op is ChangeOp.ADD_ATTRIBUTE:
            fact = next(iter(change.facts()))
            if fact in facts:
                raise InapplicableDelta(
                    f"add of already-present fact {fact.line()!r}", change=change
                )
            facts.add(fact)
        elif change.op is ChangeOp.DELETE_ATTRIBUTE:
            fact = next(iter(change.facts()))
            if fact not in facts:
                raise InapplicableDelta(
                    f"delete of absent fact {fact.line()!r}", change=change
                )
            facts.remove(fact)
        elif change.op is ChangeOp.ADD_RECORD:
            subject = change.payload.subject.canonical_value
            if subject in subjects:
                raise InapplicableDelta(
                    f"add of already-present record {subject}", change=change
                )
            subjects.add(subject)
            facts |= change.facts()
        elif change.op is ChangeOp.DELETE_RECORD:
            subject = change.payload.subject.canonical_value
            existing = by_subject.get(subject)
            if existing is None:
                raise InapplicableDelta(
                    f"delete of absent record {subject}", change=change
                )
            if existing.attributes != change.payload.attributes:
                raise InapplicableDelta(
                    f"record {subject} does not match delete payload", change=change
                )
            subjects.discard(subject)
            facts -= change.facts()

    schema_objects = set(schema.objects)
    for change in cs.low_level:
        if change.op is ChangeOp.ADD_SCHEMA_OBJECT:
            if change.payload in schema_objects:
                raise InapplicableDelta(
                    f"add of already-present schema object "
                    f"{change.payload.id.canonical_value}",
                    change=change,
                )
            schema_objects.add(change.payload)
        elif change.op is ChangeOp.DELETE_SCHEMA_OBJECT:
            if change.payload not in schema_objects:
                raise InapplicableDelta(
                    f"delete of absent schema object "
                    f"{change.payload.id.canonical_value}",
                    change=change,
                )
            schema_objects.remove(change.payload)

    return SchemaVersion.of(schema_objects), RecordSet.from_facts(facts)


def _invert_change(change: LowLevelChange) -> LowLevelChange:
    return LowLevelChange(_INVERSE[change.op], change.payload, subject=change.subject)


def invert_delta(cs: ChangeSet) -> ChangeSet:
    """Swap adds and deletes and the version endpoints (an involution)."""
    inverted = {change: _invert_change(change) for change in cs.low_level}
    high_level = tuple(
        HighLevelChange(
            hl.name,
            tuple(inverted[c] for c in hl.constituents),
            hl.context,
            hl.annotation,
        )
        for hl in cs.high_level
    )
    return ChangeSet(
        dataset_id=cs.dataset_id,
        from_version=cs.to_version,
        to_version=cs.from_version,
        low_level=tuple(inverted.values()),
        high_level=high_level,
    )


HL_DELIMITER = "==HL=="
_CONTEXT_JOIN = "|"


def changeset_to_text(cs: ChangeSet) -> str:
    """Serialize to the canonical ``.cs`` format (deterministic)."""
    from_value = cs.from_version.canonical_value if cs.from_version else "-"
    to_value = cs.to_version.canonical_value if cs.to_version else "-"
    out = [f"{from_value}\t{to_value}"]
    line_numbers: dict[LowLevelChange, list[int]] = {}
    next_no = 1
    for change in cs.low_level:
        lines = change.lines()
        line_numbers[change] = list(range(next_no, next_no + len(lines)))
        next_no += len(lines)
        out.extend(lines)
    if cs.high_level:
        out.append(HL_DELIMITER)
        for hl in cs.high_level:
            context = _CONTEXT_JOIN.join(i.canonical_value for i in hl.context)
            numbers = ",".join(
                str(n) for c in hl.constituents for n in line_numbers[c]
            )
            fields = [hl.name, context, numbers]
            if hl.annotation is not None:
                fields.append(hl.annotation)
            out.append("\t".join(fields))
    return "".join(line + "\n" for line in out)


def _change_from_group(op: ChangeOp, lines: list[str], start_no: int) -> LowLevelChange:
    if op in SCHEMA_OPS:
        obj = SchemaObject.from_line(lines[0], start_no)
        return LowLevelChange(op, obj)
    facts = [
        parse_fact_line(line, start_no + offset) for offset, line in enumerate(lines)
    ]
    if op in ATTRIBUTE_OPS:
        subject, attr = fact_to_attribute(facts[0])
        return LowLevelChange(op, attr, subject=subject)
    subject = classify_value(facts[0].subject)
    attrs = [fact_to_attribute(fact)[1] for fact in facts]
    return LowLevelChange(op, Record.of(subject, attrs))


def changeset_from_text(text: str) -> ChangeSet:
    lines = text.splitlines()
    if not lines:
        raise CorruptArchive("change set file is empty")
    header = lines[0].split("\t")
    if len(header) != 2:
        raise CorruptArchive(f"malformed change set header: {lines[0]!r}")
    from_version = None if header[0] == "-" else classify_value(header[0])
    to_version = None if header[1] == "-" else classify_value(header[1])

    body = lines[1:]
    try:
        hl_index = body.index(HL_DELIMITER)
        ll_lines, hl_lines = body[:hl_index], body[hl_index + 1 :]
    except ValueError:
        ll_lines, hl_lines = body, []

    changes: list[LowLevelChange] = []
    line_to_change: dict[int, LowLevelChange] = {}
    index = 0
    while index < len(ll_lines):
        parts = ll_lines[index].split("\t")
        if len(parts) != 6:
            raise CorruptArchive(f"malformed change line: {ll_lines[index]!r}")
        try:
            op = ChangeOp(parts[0])
        except ValueError:
            raise CorruptArchive(f"unknown change op {parts[0]!r}") from None
        end = index + 1
        if op in RECORD_OPS:
            # A record op's lines share (op, subject) and are contiguous.
            while end < len(ll_lines):
                nxt = ll_lines[end].split("\t")
                if len(nxt) == 6 and nxt[0] == parts[0] and nxt[1] == parts[1]:
                    end += 1
                else:
                    break
        payload_lines = [
            line.split("\t", 1)[1] for line in ll_lines[index:end]
        ]
        change = _change_from_group(op, payload_lines, index + 1)
        changes.append(change)
        for line_no in range(index + 1, end + 1):
            line_to_change[line_no] = change
        index = end

    high_level = []
    for line in hl_lines:
        fields = line.split("\t")
        if len(fields) not in (3, 4):
            raise CorruptArchive(f"malformed high-level line: {line!r}")
        name, context_text, numbers_text = fields[:3]
        annotation = fields[3] if len(fields) == 4 else None
        context = tuple(
            classify_value(v) for v in context_text.split(_CONTEXT_JOIN) if v
        )
        constituents: list[LowLevelChange] = []
        for number_text in numbers_text.split(","):
            try:
                change = line_to_change[int(number_text)]
            except (ValueError, KeyError):
                raise CorruptArchive(
                    f"high-level line references unknown line {number_text!r}"
                ) from None
            if change not in constituents:
                constituents.append(change)
        high_level.append(
            HighLevelChange(name, tuple(constituents), context, annotation)
        )

    return ChangeSet(
        dataset_id=None,
        from_version=from_version,
        to_version=to_version,
        low_level=tuple(changes),
        high_level=tuple(high_level),
    )
