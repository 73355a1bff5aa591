"""CSV input surface and the source-model configs.

CSV input is RFC-4180 (quoted cells may contain commas, quotes and
newlines) with a mandatory header row, which is validated against the
config's column names.  Empty cells are nulls.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from enum import Enum

from .errors import ConfigMismatch, ParseError, ValidationError
from .values import Datatype

__all__ = [
    "ColumnSpec",
    "RelationalConfig",
    "CubeRole",
    "CubeColumnSpec",
    "CubeConfig",
    "parse_csv",
    "load_config",
    "config_from_dict",
    "config_to_dict",
]


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    datatype: Datatype


@dataclass(frozen=True)
class RelationalConfig:
    table_name: str
    columns: tuple[ColumnSpec, ...]
    primary_key: tuple[str, ...]

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValidationError(f"duplicate column names in {self.table_name}")
        if not self.primary_key:
            raise ValidationError(f"table {self.table_name} needs a primary key")
        missing = [k for k in self.primary_key if k not in names]
        if missing:
            raise ValidationError(f"primary key columns not in table: {missing}")

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)


class CubeRole(Enum):
    DIMENSION = "dimension"
    MEASURE = "measure"
    ATTRIBUTE = "attribute"


@dataclass(frozen=True)
class CubeColumnSpec:
    name: str
    role: CubeRole
    datatype: Datatype


@dataclass(frozen=True)
class CubeConfig:
    columns: tuple[CubeColumnSpec, ...]

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValidationError("duplicate column names in cube config")
        roles = {c.role for c in self.columns}
        if CubeRole.DIMENSION not in roles or CubeRole.MEASURE not in roles:
            raise ValidationError("cube needs at least one dimension and one measure")

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    @property
    def dimensions(self) -> tuple[CubeColumnSpec, ...]:
        return tuple(c for c in self.columns if c.role is CubeRole.DIMENSION)


def parse_csv(text: str, columns: tuple[str, ...]) -> list[list[str]]:
    """Parse CSV text, validating the header and row widths.

    Returns the data rows only; every row has exactly ``len(columns)``
    cells.  A missing or mismatched header raises ``ConfigMismatch``; a
    ragged data row raises ``ParseError`` with its line number.
    """
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise ConfigMismatch("input has no header row") from None
    if tuple(header) != tuple(columns):
        raise ConfigMismatch(
            f"header {header!r} does not match configured columns {list(columns)!r}"
        )
    rows = []
    for row in reader:
        if not row:
            continue
        if len(row) != len(columns):
            raise ParseError(
                f"row has {len(row)} cells, expected {len(columns)}",
                line_no=reader.line_num,
            )
        rows.append(row)
    return rows


def _datatype(raw: str, context: str) -> Datatype:
    try:
        return Datatype(raw)
    except ValueError:
        raise ConfigMismatch(f"unknown datatype {raw!r} in {context}") from None


def load_config(text: str, source_model: str) -> RelationalConfig | CubeConfig:
    """Load a JSON config document for the given source model."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigMismatch(f"config is not valid JSON: {exc}") from None
    return config_from_dict(doc, source_model)


def config_from_dict(doc: dict, source_model: str) -> RelationalConfig | CubeConfig:
    try:
        if source_model == "relational":
            return RelationalConfig(
                table_name=doc["table_name"],
                columns=tuple(
                    ColumnSpec(c["name"], _datatype(c["datatype"], c["name"]))
                    for c in doc["columns"]
                ),
                primary_key=tuple(doc["primary_key"]),
            )
        if source_model == "multidimensional":
            return CubeConfig(
                columns=tuple(
                    CubeColumnSpec(
                        c["name"],
                        CubeRole(c["role"]),
                        _datatype(c["datatype"], c["name"]),
                    )
                    for c in doc["columns"]
                ),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigMismatch(f"malformed {source_model} config: {exc}") from None
    raise ConfigMismatch(f"source model {source_model!r} takes no config")
