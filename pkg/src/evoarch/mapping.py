"""Source-model mapping into the uniform (schema, record set) abstraction.

Relational tables map to one class plus one property per column; each
row becomes a record whose subject is minted from its primary-key
values.  Cube rows become observation records whose subjects are minted
from the dimension-value tuple.  RDF triples are grouped by subject,
one record per subject.  In every model the subject's type assertion is
stored as an ordinary record attribute under the built-in type
predicate, so typing changes show up in deltas like any other fact.
"""

from __future__ import annotations

from .errors import DuplicateKey, InvalidIdentifierComponent, ValueSyntaxError
from .identifiers import (
    Identifier,
    MintKind,
    composite_key_identifier,
    decode_component,
    mint_identifier,
)
from .model import (
    RDF_TYPE,
    RDFS_DOMAIN,
    RDFS_RANGE,
    RDFS_RESOURCE,
    Literal,
    Record,
    RecordAttribute,
    RecordSet,
    Ref,
    SchemaKind,
    SchemaObject,
    SchemaVersion,
    SourceConstruct,
)
from .ntriples import Triple
from .tabular import CubeConfig, CubeRole, RelationalConfig
from .values import XSD_TO_DATATYPE, Datatype, canonicalize_value

__all__ = [
    "map_relational",
    "map_multidimensional",
    "map_rdf",
    "dataset_slug",
    "OBSERVATION_CLASS_NAME",
]

# Class name minted for the implicit observation class of cube datasets.
OBSERVATION_CLASS_NAME = "observation"

_CUBE_CONSTRUCT = {
    CubeRole.DIMENSION: SourceConstruct.DIMENSION,
    CubeRole.MEASURE: SourceConstruct.MEASURE,
    CubeRole.ATTRIBUTE: SourceConstruct.ATTRIBUTE,
}


def dataset_slug(dataset: Identifier) -> str:
    """Extract the slug from a diachronic dataset identifier."""
    value = dataset.canonical_value
    prefix = "evoarch:ds/"
    if not value.startswith(prefix) or "/" in value[len(prefix):]:
        raise InvalidIdentifierComponent(f"not a diachronic dataset id: {value}")
    return decode_component(value[len(prefix):])


def _canonical_cell(raw: str, datatype: Datatype, column: str, row_no: int) -> str:
    try:
        return canonicalize_value(raw, datatype)
    except ValueSyntaxError as exc:
        raise ValueSyntaxError(
            f"row {row_no}, column {column!r}: {exc.message}"
        ) from None


def map_relational(
    rows: list[list[str]], cfg: RelationalConfig, dataset: Identifier
) -> tuple[SchemaVersion, RecordSet]:
    """Apply the relational mapping rules to parsed rows.

    Empty cells assert nothing; key cells must be present and unique
    (after canonicalization) across rows.
    """
    slug = dataset_slug(dataset)
    class_id = mint_identifier(MintKind.SCHEMA_OBJECT, [slug, cfg.table_name])
    objects = [SchemaObject(class_id, SchemaKind.CLASS, SourceConstruct.TABLE)]
    properties: dict[str, Identifier] = {}
    for column in cfg.columns:
        prop_id = mint_identifier(MintKind.SCHEMA_OBJECT, [slug, column.name])
        properties[column.name] = prop_id
        objects.append(
            SchemaObject(
                prop_id,
                SchemaKind.PROPERTY,
                SourceConstruct.COLUMN,
                domain_class=class_id,
                range=column.datatype,
            )
        )
    schema = SchemaVersion.of(objects)

    key_positions = [cfg.column_names.index(k) for k in cfg.primary_key]
    seen_keys: set[tuple[str, ...]] = set()
    records = []
    for row_no, row in enumerate(rows, start=1):
        key_values = []
        for position in key_positions:
            column = cfg.columns[position]
            if row[position] == "":
                raise ValueSyntaxError(
                    f"row {row_no}: key column {column.name!r} is null"
                )
            key_values.append(
                _canonical_cell(row[position], column.datatype, column.name, row_no)
            )
        key = tuple(key_values)
        if key in seen_keys:
            raise DuplicateKey(f"duplicate primary key {key}", values=key)
        seen_keys.add(key)
        key_id = composite_key_identifier(key_values, cfg.primary_key)
        subject = mint_identifier(
            MintKind.RECORD, [slug, "pk", key_id.canonical_value]
        )
        attributes = [RecordAttribute(RDF_TYPE, Ref(class_id))]
        for column, cell in zip(cfg.columns, row):
            if cell == "":
                continue
            lexical = _canonical_cell(cell, column.datatype, column.name, row_no)
            attributes.append(
                RecordAttribute(
                    properties[column.name], Literal(lexical, column.datatype)
                )
            )
        records.append(Record.of(subject, attributes))
    return schema, RecordSet.from_records(records)


def map_multidimensional(
    rows: list[list[str]], cfg: CubeConfig, dataset: Identifier
) -> tuple[SchemaVersion, RecordSet]:
    """Map cube rows to observation records.

    Each row is one observation, identified by its dimension-value tuple
    in config column order.
    """
    slug = dataset_slug(dataset)
    class_id = mint_identifier(MintKind.SCHEMA_OBJECT, [slug, OBSERVATION_CLASS_NAME])
    objects = [SchemaObject(class_id, SchemaKind.CLASS, SourceConstruct.TABLE)]
    properties: dict[str, Identifier] = {}
    for column in cfg.columns:
        prop_id = mint_identifier(MintKind.SCHEMA_OBJECT, [slug, column.name])
        properties[column.name] = prop_id
        objects.append(
            SchemaObject(
                prop_id,
                SchemaKind.PROPERTY,
                _CUBE_CONSTRUCT[column.role],
                domain_class=class_id,
                range=column.datatype,
            )
        )
    schema = SchemaVersion.of(objects)

    dim_positions = [
        i for i, column in enumerate(cfg.columns) if column.role is CubeRole.DIMENSION
    ]
    seen: set[tuple[str, ...]] = set()
    records = []
    for row_no, row in enumerate(rows, start=1):
        dim_values = []
        for position in dim_positions:
            column = cfg.columns[position]
            if row[position] == "":
                raise ValueSyntaxError(
                    f"row {row_no}: dimension {column.name!r} is null"
                )
            dim_values.append(
                _canonical_cell(row[position], column.datatype, column.name, row_no)
            )
        key = tuple(dim_values)
        if key in seen:
            raise DuplicateKey(f"duplicate dimension tuple {key}", values=key)
        seen.add(key)
        key_id = composite_key_identifier(
            dim_values, [cfg.columns[i].name for i in dim_positions]
        )
        subject = mint_identifier(
            MintKind.RECORD, [slug, "dim", key_id.canonical_value]
        )
        attributes = [RecordAttribute(RDF_TYPE, Ref(class_id))]
        for column, cell in zip(cfg.columns, row):
            if cell == "":
                continue
            lexical = _canonical_cell(cell, column.datatype, column.name, row_no)
            attributes.append(
                RecordAttribute(
                    properties[column.name], Literal(lexical, column.datatype)
                )
            )
        records.append(Record.of(subject, attributes))
    return schema, RecordSet.from_records(records)


def map_rdf(
    triples: list[Triple], dataset: Identifier
) -> tuple[SchemaVersion, RecordSet]:
    """Group triples by subject into records and derive the schema.

    Every predicate becomes a property schema object; objects of type
    assertions become class schema objects; explicit standard-vocabulary
    domain/range assertions populate the property definitions.  Duplicate
    triples collapse (set semantics); the resulting record count equals
    the number of distinct subjects and the attribute total equals the
    number of distinct triples.
    """
    slug = dataset_slug(dataset)
    facts: dict[Identifier, set[RecordAttribute]] = {}
    predicates: dict[Identifier, None] = {}
    classes: dict[Identifier, None] = {}
    domains: dict[Identifier, Identifier] = {}
    ranges: dict[Identifier, Identifier | Datatype] = {}
    observed_objects: dict[Identifier, set[ObjectKey]] = {}

    for triple in triples:
        facts.setdefault(triple.subject, set()).add(
            RecordAttribute(triple.predicate, triple.object)
        )
        predicates.setdefault(triple.predicate)
        obj = triple.object
        if triple.predicate == RDF_TYPE and isinstance(obj, Ref):
            classes.setdefault(obj.target)
        if triple.predicate == RDFS_DOMAIN and isinstance(obj, Ref):
            domains[triple.subject] = obj.target
        if triple.predicate == RDFS_RANGE and isinstance(obj, Ref):
            ranges[triple.subject] = XSD_TO_DATATYPE.get(
                obj.target.canonical_value, obj.target
            )
        observed_objects.setdefault(triple.predicate, set()).add(_object_key(obj))

    objects = [
        SchemaObject(class_id, SchemaKind.CLASS, SourceConstruct.RDF_CLASS)
        for class_id in classes
    ]
    for predicate in predicates:
        objects.append(
            SchemaObject(
                predicate,
                SchemaKind.PROPERTY,
                SourceConstruct.RDF_PROPERTY,
                domain_class=domains.get(predicate),
                range=ranges.get(
                    predicate, _inferred_range(observed_objects[predicate])
                ),
            )
        )
    schema = SchemaVersion.of(objects)

    records = []
    for subject, attributes in facts.items():
        record_id = mint_identifier(
            MintKind.RECORD, [slug, "sub", subject.canonical_value]
        )
        records.append(Record.of(subject, attributes, record_id))
    return schema, RecordSet.from_records(records)


ObjectKey = tuple[str, str]


def _object_key(obj) -> ObjectKey:
    if isinstance(obj, Ref):
        return ("ref", "-")
    return ("lit", obj.datatype.value)


def _inferred_range(observed: set[ObjectKey]) -> Identifier | Datatype:
    """Fallback range when no explicit assertion exists.

    A property whose observed objects are literals of a single datatype
    gets that datatype; anything mixed or reference-valued falls back to
    the generic resource class.
    """
    kinds = {k for k, _ in observed}
    datatypes = {d for k, d in observed if k == "lit"}
    if kinds == {"lit"} and len(datatypes) == 1:
        return Datatype(next(iter(datatypes)))
    return RDFS_RESOURCE
