"""On-disk archive: datasets, immutable versions, blobs, change sets.

Layout under the archive root::

    archive.meta                      JSON manifest
    archive.lock                      writer lock
    datasets/<slug>/dataset.meta      dataset + version metadata (JSON)
    blobs/<hash>.facts                canonical facts file (content-addressed)
    blobs/<hash>.schema               canonical schema file
    changesets/<slug>/<from>_<to>.cs  cached change set between adjacent versions
    resources/<name>.def              diachronic resource definition (JSON)

Versions are stored as full snapshots, content-addressed by their facts
hash, so equal fact sets share one blob and every snapshot read is
independent of history length.  The change set against the immediate
predecessor is computed at commit time and cached.  Mutations take the
single writer lock; reads never do, because committed blobs are
immutable and metadata files are replaced atomically.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from filelock import FileLock, Timeout

from .changes import ChangeSet, changeset_from_text, changeset_to_text, compute_delta
from .errors import (
    AlreadyInitialized,
    ArchiveLocked,
    CorruptArchive,
    DatasetExists,
    DatasetNotFound,
    NoVersionAtTime,
    NotInitialized,
    ResourceExists,
    ResourceNotFound,
    TemporalOrderViolation,
    ValidationError,
    VersionNotFound,
)
from .identifiers import Identifier, MintKind, Scheme, mint_identifier, slugify
from .mapping import dataset_slug
from .model import (
    DatasetInstantiation,
    DiachronicDataset,
    ProvenanceInfo,
    RecordSet,
    SchemaVersion,
    SourceModel,
    TemporalAnnotation,
    TemporalInterval,
)
from .rules import derive_high_level
from .values import format_timestamp, parse_timestamp

__all__ = ["ArchiveManifest", "Archive"]

FORMAT_VERSION = 1
MANIFEST_NAME = "archive.meta"
LOCK_NAME = "archive.lock"
LOCK_TIMEOUT_SECONDS = 10.0


@dataclass(frozen=True)
class ArchiveManifest:
    format_version: int
    created_at: datetime
    dataset_index: tuple[str, ...]


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def _write_json(path: Path, document: dict) -> None:
    _atomic_write(path, (json.dumps(document, indent=2, sort_keys=True) + "\n").encode())


def _read_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorruptArchive(f"{path.name} is not valid JSON: {exc}") from None


def _optional_timestamp(raw: str | None) -> datetime | None:
    return None if raw is None else parse_timestamp(raw)


class Archive:
    """Handle on one archive root directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        if not (self.root / MANIFEST_NAME).is_file():
            raise NotInitialized(f"{self.root} is not an initialized archive")

    # -- lifecycle ---------------------------------------------------------

    @classmethod
    def init(cls, root: str | Path, now: datetime | None = None) -> "Archive":
        root = Path(root)
        if root.exists() and any(root.iterdir()):
            raise AlreadyInitialized(f"{root} already exists and is not empty")
        for sub in ("datasets", "blobs", "changesets", "resources"):
            (root / sub).mkdir(parents=True, exist_ok=True)
        created = now or datetime.now(tz=timezone.utc)
        _write_json(
            root / MANIFEST_NAME,
            {
                "format_version": FORMAT_VERSION,
                "created_at": format_timestamp(created),
                "dataset_index": [],
            },
        )
        return cls(root)

    def manifest(self) -> ArchiveManifest:
        doc = _read_json(self.root / MANIFEST_NAME)
        if doc.get("format_version") != FORMAT_VERSION:
            raise CorruptArchive(
                f"unsupported archive format version {doc.get('format_version')!r}"
            )
        return ArchiveManifest(
            doc["format_version"],
            parse_timestamp(doc["created_at"]),
            tuple(doc["dataset_index"]),
        )

    @contextmanager
    def _writer_lock(self):
        lock = FileLock(self.root / LOCK_NAME)
        try:
            with lock.acquire(timeout=LOCK_TIMEOUT_SECONDS):
                yield
        except Timeout:
            raise ArchiveLocked(
                f"another writer holds the lock on {self.root}"
            ) from None

    # -- datasets ----------------------------------------------------------

    def _slug_of(self, dataset_ref: Identifier | str) -> str:
        if isinstance(dataset_ref, Identifier):
            return dataset_slug(dataset_ref)
        if dataset_ref.startswith("evoarch:"):
            return dataset_slug(Identifier(Scheme.URI, dataset_ref))
        return dataset_ref

    def _meta_path(self, slug: str) -> Path:
        return self.root / "datasets" / slug / "dataset.meta"

    def _load_meta(self, dataset_ref: Identifier | str) -> tuple[str, dict]:
        slug = self._slug_of(dataset_ref)
        path = self._meta_path(slug)
        if not path.is_file():
            raise DatasetNotFound(f"no dataset {slug!r} in archive")
        return slug, _read_json(path)

    def register_dataset(
        self, title: str, source_model: SourceModel | str
    ) -> DiachronicDataset:
        source_model = SourceModel(source_model)
        slug = slugify(title)
        diachronic_id = mint_identifier(MintKind.DIACHRONIC_DATASET, [slug])
        with self._writer_lock():
            path = self._meta_path(slug)
            if path.exists():
                raise DatasetExists(f"dataset {slug!r} already registered")
            path.parent.mkdir(parents=True, exist_ok=True)
            _write_json(
                path,
                {
                    "diachronic_id": diachronic_id.canonical_value,
                    "title": title,
                    "source_model": source_model.value,
                    "versions": [],
                },
            )
            manifest_doc = _read_json(self.root / MANIFEST_NAME)
            index = set(manifest_doc["dataset_index"])
            index.add(diachronic_id.canonical_value)
            manifest_doc["dataset_index"] = sorted(index)
            _write_json(self.root / MANIFEST_NAME, manifest_doc)
        return DiachronicDataset(diachronic_id, title, source_model)

    def dataset(self, dataset_ref: Identifier | str) -> DiachronicDataset:
        slug, meta = self._load_meta(dataset_ref)
        version_ids = tuple(
            Identifier(Scheme.URI, entry["version_id"]) for entry in meta["versions"]
        )
        return DiachronicDataset(
            Identifier(Scheme.URI, meta["diachronic_id"]),
            meta["title"],
            SourceModel(meta["source_model"]),
            version_ids,
        )

    def list_datasets(
        self, source_model: SourceModel | str | None = None
    ) -> list[DiachronicDataset]:
        wanted = None if source_model is None else SourceModel(source_model)
        datasets = []
        for value in self.manifest().dataset_index:
            ds = self.dataset(value)
            if wanted is None or ds.source_model is wanted:
                datasets.append(ds)
        return sorted(datasets, key=lambda d: d.diachronic_id.canonical_value)

    # -- versions ----------------------------------------------------------

    @staticmethod
    def _instantiation(meta: dict, entry: dict) -> DatasetInstantiation:
        tx = TemporalInterval(
            parse_timestamp(entry["tx_start"]), _optional_timestamp(entry["tx_end"])
        )
        valid = None
        if entry["valid_from"] is not None:
            valid = TemporalInterval(
                parse_timestamp(entry["valid_from"]),
                _optional_timestamp(entry["valid_to"]),
            )
        prov = entry["provenance"]
        return DatasetInstantiation(
            version_id=Identifier(Scheme.URI, entry["version_id"]),
            diachronic_id=Identifier(Scheme.URI, meta["diachronic_id"]),
            temporal=TemporalAnnotation(tx, valid),
            provenance=ProvenanceInfo(
                agent=prov["agent"],
                process=prov["process"],
                source=prov["source"],
                recorded_at=parse_timestamp(prov["recorded_at"]),
                annotation=prov["annotation"],
            ),
            schema_version_id=Identifier(Scheme.OPAQUE, entry["schema_version_id"]),
            record_set_hash=entry["record_set_hash"],
        )

    @staticmethod
    def _version_name(version_ref: Identifier | str) -> str:
        value = (
            version_ref.canonical_value
            if isinstance(version_ref, Identifier)
            else version_ref
        )
        return value.rsplit("/", 1)[-1]

    def _entry_for(self, meta: dict, version_ref: Identifier | str) -> dict:
        name = self._version_name(version_ref)
        for entry in meta["versions"]:
            if entry["name"] == name:
                return entry
        raise VersionNotFound(f"no version {name!r}")

    def commit_version(
        self,
        dataset_ref: Identifier | str,
        schema: SchemaVersion,
        rs: RecordSet,
        temporal: TemporalAnnotation,
        prov: ProvenanceInfo,
        config: dict | None = None,
    ) -> DatasetInstantiation:
        """Commit an immutable version; caches the delta to its predecessor."""
        if temporal.transaction_time.end is not None:
            raise TemporalOrderViolation(
                "a newly committed version must have an open transaction interval"
            )
        with self._writer_lock():
            slug, meta = self._load_meta(dataset_ref)
            versions = meta["versions"]
            start = temporal.transaction_time.start
            previous = versions[-1] if versions else None
            if previous is not None:
                prev_start = parse_timestamp(previous["tx_start"])
                if start <= prev_start:
                    raise TemporalOrderViolation(
                        f"transaction start {format_timestamp(start)} is not after "
                        f"the previous version's {format_timestamp(prev_start)}"
                    )
            seq = len(versions) + 1
            name = f"v{seq:04d}"
            version_id = mint_identifier(MintKind.VERSION, [slug, name])

            facts_text = rs.to_text()
            facts_hash = rs.content_hash
            schema_text = schema.to_text()
            schema_hash = hashlib.sha256(schema_text.encode("utf-8")).hexdigest()
            self._store_blob(f"{facts_hash}.facts", facts_text)
            self._store_blob(f"{schema_hash}.schema", schema_text)

            entry = {
                "name": name,
                "version_id": version_id.canonical_value,
                "tx_start": format_timestamp(start),
                "tx_end": None,
                "valid_from": (
                    format_timestamp(temporal.valid_time.start)
                    if temporal.valid_time
                    else None
                ),
                "valid_to": (
                    format_timestamp(temporal.valid_time.end)
                    if temporal.valid_time and temporal.valid_time.end
                    else None
                ),
                "provenance": {
                    "agent": prov.agent,
                    "process": prov.process,
                    "source": prov.source,
                    "recorded_at": format_timestamp(prov.recorded_at),
                    "annotation": prov.annotation,
                },
                "schema_version_id": schema.id.canonical_value,
                "schema_hash": schema_hash,
                "record_set_hash": facts_hash,
                "config": config,
                "changeset_from": None,
            }

            inst = self._instantiation(meta, entry)
            if previous is not None:
                prev_inst = self._instantiation(meta, previous)
                prev_pair = self._load_pair(previous)
                cs = compute_delta(
                    prev_pair, (schema, rs), from_inst=prev_inst, to_inst=inst
                )
                cs = derive_high_level(cs)
                cs_dir = self.root / "changesets" / slug
                cs_dir.mkdir(parents=True, exist_ok=True)
                cs_name = f"{previous['name']}_{name}.cs"
                _atomic_write(cs_dir / cs_name, changeset_to_text(cs).encode("utf-8"))
                entry["changeset_from"] = previous["name"]
                previous["tx_end"] = entry["tx_start"]

            versions.append(entry)
            _write_json(self._meta_path(slug), meta)
        return inst

    def _store_blob(self, filename: str, text: str) -> None:
        path = self.root / "blobs" / filename
        if not path.exists():
            _atomic_write(path, text.encode("utf-8"))

    def _load_pair(self, entry: dict) -> tuple[SchemaVersion, RecordSet]:
        facts_path = self.root / "blobs" / f"{entry['record_set_hash']}.facts"
        schema_path = self.root / "blobs" / f"{entry['schema_hash']}.schema"
        try:
            facts_bytes = facts_path.read_bytes()
        except FileNotFoundError:
            raise CorruptArchive(f"missing facts blob {facts_path.name}") from None
        if hashlib.sha256(facts_bytes).hexdigest() != entry["record_set_hash"]:
            raise CorruptArchive(
                f"facts blob {facts_path.name} does not match its content hash"
            )
        try:
            schema_bytes = schema_path.read_bytes()
        except FileNotFoundError:
            raise CorruptArchive(f"missing schema blob {schema_path.name}") from None
        if hashlib.sha256(schema_bytes).hexdigest() != entry["schema_hash"]:
            raise CorruptArchive(
                f"schema blob {schema_path.name} does not match its content hash"
            )
        try:
            rs = RecordSet.from_text(facts_bytes.decode("utf-8"))
            schema = SchemaVersion.from_text(schema_bytes.decode("utf-8"))
        except (CorruptArchive, UnicodeDecodeError, ValidationError, ValueError) as exc:
            raise CorruptArchive(f"cannot parse stored version: {exc}") from None
        if rs.content_hash != entry["record_set_hash"]:
            raise CorruptArchive("reparsed record set hash mismatch")
        if schema.id.canonical_value != entry["schema_version_id"]:
            raise CorruptArchive("reparsed schema version id mismatch")
        return schema, rs

    def get_version(
        self, dataset_ref: Identifier | str, version_ref: Identifier | str
    ) -> tuple[DatasetInstantiation, SchemaVersion, RecordSet]:
        slug, meta = self._load_meta(dataset_ref)
        entry = self._entry_for(meta, version_ref)
        schema, rs = self._load_pair(entry)
        return self._instantiation(meta, entry), schema, rs

    def instantiation(
        self, dataset_ref: Identifier | str, version_ref: Identifier | str
    ) -> DatasetInstantiation:
        slug, meta = self._load_meta(dataset_ref)
        return self._instantiation(meta, self._entry_for(meta, version_ref))

    def resolve_version_at(
        self, dataset_ref: Identifier | str, t: datetime
    ) -> DatasetInstantiation:
        slug, meta = self._load_meta(dataset_ref)
        chosen = None
        for entry in meta["versions"]:
            if parse_timestamp(entry["tx_start"]) <= t:
                chosen = entry
        if chosen is None:
            raise NoVersionAtTime(
                f"no version of {slug!r} at {format_timestamp(t)}"
            )
        return self._instantiation(meta, chosen)

    def list_versions(
        self,
        dataset_ref: Identifier | str,
        agent: str | None = None,
        overlaps: TemporalInterval | None = None,
    ) -> list[DatasetInstantiation]:
        slug, meta = self._load_meta(dataset_ref)
        out = []
        for entry in meta["versions"]:
            inst = self._instantiation(meta, entry)
            if agent is not None and inst.provenance.agent != agent:
                continue
            if overlaps is not None and not inst.temporal.transaction_time.overlaps(
                overlaps
            ):
                continue
            out.append(inst)
        return out

    def version_config(
        self, dataset_ref: Identifier | str, version_ref: Identifier | str
    ) -> dict | None:
        slug, meta = self._load_meta(dataset_ref)
        return self._entry_for(meta, version_ref)["config"]

    # -- change sets ---------------------------------------------------------

    def cached_changeset_text(
        self,
        dataset_ref: Identifier | str,
        from_ref: Identifier | str,
        to_ref: Identifier | str,
    ) -> str | None:
        """Raw cached change set between adjacent versions, if present."""
        slug, meta = self._load_meta(dataset_ref)
        from_name = self._version_name(from_ref)
        to_entry = self._entry_for(meta, to_ref)
        if to_entry["changeset_from"] != from_name:
            return None
        path = self.root / "changesets" / slug / f"{from_name}_{to_entry['name']}.cs"
        if not path.is_file():
            raise CorruptArchive(f"missing cached change set {path.name}")
        return path.read_text(encoding="utf-8")

    def iter_cached_changesets(self):
        """Yield (dataset, to_instantiation, change set) for all cached deltas."""
        for ds in self.list_datasets():
            slug, meta = self._load_meta(ds.diachronic_id)
            for entry in meta["versions"]:
                if entry["changeset_from"] is None:
                    continue
                text = self.cached_changeset_text(
                    ds.diachronic_id, entry["changeset_from"], entry["name"]
                )
                yield ds, self._instantiation(meta, entry), changeset_from_text(text)

    # -- resources -----------------------------------------------------------

    def _resource_path(self, name: str) -> Path:
        return self.root / "resources" / f"{name}.def"

    def save_resource(self, name: str, definition: dict) -> None:
        with self._writer_lock():
            path = self._resource_path(name)
            if path.exists():
                raise ResourceExists(f"resource {name!r} already defined")
            _write_json(path, definition)

    def load_resource_definition(self, name: str) -> dict:
        path = self._resource_path(name)
        if not path.is_file():
            raise ResourceNotFound(f"no resource {name!r}")
        return _read_json(path)

    def list_resource_names(self) -> list[str]:
        return sorted(p.stem for p in (self.root / "resources").glob("*.def"))
