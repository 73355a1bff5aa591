"""Reified, scoped identifiers and the archive URI scheme.

All archive-minted identifiers are deterministic ``evoarch:`` URIs:

    evoarch:ds/<dataset>                 diachronic dataset
    evoarch:ds/<dataset>/v/<version>     dataset instantiation
    evoarch:ds/<dataset>/rec/<key>       record subject
    evoarch:ds/<dataset>/schema/<name>   schema object
    evoarch:res/<name>                   diachronic resource

Components are percent-encoded so that the separator characters
(``/ % |``) and whitespace (space, tab, newline, CR) can never collide
with URI structure, facts-file fields, or composite-key joints.  Minting
is therefore injective: distinct component values yield distinct URIs.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

from .errors import InvalidIdentifierComponent

__all__ = [
    "Scheme",
    "Scope",
    "MintKind",
    "Identifier",
    "encode_component",
    "decode_component",
    "mint_identifier",
    "composite_key_identifier",
    "uri_identifier",
    "classify_value",
    "slugify",
]


class Scheme(Enum):
    URI = "uri"
    COMPOSITE_KEY = "composite-key"
    OPAQUE = "opaque"


class Scope(Enum):
    DIACHRONIC = "diachronic"
    VERSION_SPECIFIC = "version-specific"


class MintKind(Enum):
    DIACHRONIC_DATASET = "diachronic-dataset"
    VERSION = "version"
    RECORD = "record"
    SCHEMA_OBJECT = "schema-object"
    RESOURCE = "resource"


# Characters that must never appear raw inside a URI component: the path
# separator, the escape character itself, the composite-key joint, and
# whitespace (facts files are line- and tab-delimited).
_ENCODE_MAP = {
    "%": "%25",
    "/": "%2F",
    "|": "%7C",
    " ": "%20",
    "\t": "%09",
    "\n": "%0A",
    "\r": "%0D",
}
_DECODE_RE = re.compile("%(25|2F|7C|20|09|0A|0D)", re.IGNORECASE)
_WHITESPACE_RE = re.compile(r"\s")

# Prefix used for skolemized blank nodes; such identifiers are opaque.
SKOLEM_PREFIX = "bnode:"


def encode_component(component: str) -> str:
    """Percent-encode the reserved characters of a URI component."""
    out = component.replace("%", "%25")
    for char, escaped in _ENCODE_MAP.items():
        if char != "%":
            out = out.replace(char, escaped)
    return out


def decode_component(component: str) -> str:
    """Reverse :func:`encode_component`."""
    return _DECODE_RE.sub(lambda m: bytes.fromhex(m.group(1)).decode(), component)


@dataclass(frozen=True, eq=False)
class Identifier:
    """A reified identifier abstracting URIs, primary keys and skolem ids.

    Equality and hashing cover ``(scheme, canonical_value)`` only; the
    scope and functional metadata describe the identifier without taking
    part in its identity.
    """

    scheme: Scheme
    canonical_value: str
    scope: Scope = Scope.DIACHRONIC
    functional_meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.canonical_value:
            raise InvalidIdentifierComponent("identifier value must be non-empty")
        if _WHITESPACE_RE.search(self.canonical_value):
            raise InvalidIdentifierComponent(
                f"identifier value contains raw whitespace: {self.canonical_value!r}"
            )
        if self.scheme is Scheme.COMPOSITE_KEY and "columns" not in self.functional_meta:
            raise InvalidIdentifierComponent(
                "composite-key identifiers must list their key columns"
            )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Identifier):
            return NotImplemented
        return (
            self.scheme is other.scheme
            and self.canonical_value == other.canonical_value
        )

    def __hash__(self) -> int:
        return hash((self.scheme.value, self.canonical_value))

    def __repr__(self) -> str:
        return f"Identifier({self.scheme.value}, {self.canonical_value!r})"


def _check_components(components: Sequence[str]) -> None:
    if not components:
        raise InvalidIdentifierComponent("component list must be non-empty")
    for component in components:
        if not component:
            raise InvalidIdentifierComponent("identifier components must be non-empty")


def mint_identifier(kind: MintKind | str, components: Sequence[str]) -> Identifier:
    """Mint the deterministic archive URI for an entity.

    Record identifiers take ``(dataset, key)`` or ``(dataset, key-role,
    key)`` components; the optional middle component names the mechanism
    the key was derived from (e.g. ``pk``) and is recorded as functional
    metadata rather than in the URI.
    """
    kind = MintKind(kind)
    _check_components(components)
    meta: dict[str, str] = {}

    if kind is MintKind.DIACHRONIC_DATASET:
        _require_arity(kind, components, 1)
        value = f"evoarch:ds/{encode_component(components[0])}"
        scope = Scope.DIACHRONIC
    elif kind is MintKind.VERSION:
        _require_arity(kind, components, 2)
        dataset, version = components
        value = f"evoarch:ds/{encode_component(dataset)}/v/{encode_component(version)}"
        scope = Scope.VERSION_SPECIFIC
    elif kind is MintKind.RECORD:
        if len(components) == 2:
            dataset, key = components
        elif len(components) == 3:
            dataset, role, key = components
            meta["key-role"] = role
        else:
            raise InvalidIdentifierComponent(
                f"record identifiers take 2 or 3 components, got {len(components)}"
            )
        value = f"evoarch:ds/{encode_component(dataset)}/rec/{encode_component(key)}"
        scope = Scope.VERSION_SPECIFIC
    elif kind is MintKind.SCHEMA_OBJECT:
        _require_arity(kind, components, 2)
        dataset, name = components
        value = f"evoarch:ds/{encode_component(dataset)}/schema/{encode_component(name)}"
        scope = Scope.VERSION_SPECIFIC
    else:  # MintKind.RESOURCE
        _require_arity(kind, components, 1)
        value = f"evoarch:res/{encode_component(components[0])}"
        scope = Scope.DIACHRONIC

    return Identifier(Scheme.URI, value, scope, meta)


def _require_arity(kind: MintKind, components: Sequence[str], arity: int) -> None:
    if len(components) != arity:
        raise InvalidIdentifierComponent(
            f"{kind.value} identifiers take {arity} component(s), got {len(components)}"
        )


def composite_key_identifier(
    values: Sequence[str], columns: Sequence[str]
) -> Identifier:
    """Reify a (possibly composite) primary key as an identifier.

    The canonical value joins the encoded key values with ``|``; the
    constituent column names are kept, ordered, in the functional
    metadata so the key remains interpretable.
    """
    _check_components(values)
    if len(values) != len(columns):
        raise InvalidIdentifierComponent(
            f"key has {len(values)} values for {len(columns)} columns"
        )
    joined = "|".join(encode_component(v) for v in values)
    return Identifier(
        Scheme.COMPOSITE_KEY,
        joined,
        Scope.VERSION_SPECIFIC,
        {"columns": ",".join(columns)},
    )


def uri_identifier(value: str, scope: Scope = Scope.DIACHRONIC) -> Identifier:
    return Identifier(Scheme.URI, value, scope)


def classify_value(value: str) -> Identifier:
    """Rebuild an identifier from a canonical value read off disk.

    Skolemized blank nodes carry the ``bnode:`` prefix and are opaque;
    everything else in a facts file is a URI.
    """
    if value.startswith(SKOLEM_PREFIX):
        return Identifier(Scheme.OPAQUE, value)
    return Identifier(Scheme.URI, value)


def skolem_identifier(label: str, dataset_slug: str | None = None) -> Identifier:
    """Deterministically skolemize a blank-node label."""
    if not label:
        raise InvalidIdentifierComponent("blank node label must be non-empty")
    if dataset_slug:
        value = f"{SKOLEM_PREFIX}{encode_component(dataset_slug)}/{encode_component(label)}"
    else:
        value = f"{SKOLEM_PREFIX}{encode_component(label)}"
    return Identifier(Scheme.OPAQUE, value)


_SLUG_RE = re.compile(r"[^a-z0-9]+")


def slugify(title: str) -> str:
    """Dataset slug: lowercase ASCII, runs of other characters to one hyphen."""
    slug = _SLUG_RE.sub("-", title.lower()).strip("-")
    if not slug:
        raise InvalidIdentifierComponent(f"title {title!r} yields an empty slug")
    return slug
