"""Append-only package store with dual-identifier addressing.

Ingestion wraps an asset manifest into a package document: a fresh
UUID-based package identifier on the document, one item carrying the
asset's own content identifier plus its metadata blocks, and one component
per datastream (administrative descriptor, integrity seal, resources per
the embed policy). Documents are validated before anything touches disk.

Layout on disk is one file per package plus an append-only index log:

    <root>/packages/<uuid[:2]>/<uuid>.didl.xml
    <root>/index.log    # tab-separated: created, package id, content ids, item ids

The index append is the single commit point. A crashed ingest leaves at
worst an unreferenced file, which recovery removes; a torn final log line
is truncated away. Both axes of addressing (package id, content id) are
derived from the same log line, so they can never disagree.

The store is a single-writer, many-reader structure: ingests serialize on a
lock (plus an advisory file lock against sibling processes); reads work off
immutable files and in-memory maps.
"""

from __future__ import annotations

import base64
import bisect
import dataclasses
import json
import os
import threading
import uuid as uuidlib
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional

from didlkit import codec, dii, integrity, model, validator
from didlkit.errors import (BadCursorError, FragmentNotFoundError, IdCollisionError,
                            ManifestError, PackageNotFoundError, StoreError)
from didlkit.namespaces import ADMIN_NS, DC_NS, DCTERMS_NS
from didlkit.validator import is_absolute_uri
from didlkit.xmltree import XmlNode, element

try:
    import fcntl
except ImportError:  # non-POSIX: in-process locking only
    fcntl = None

DEFAULT_AUTHORITY = "didlkit-repo"
EMBED_POLICIES = ("by-ref", "by-value", "both")

Clock = Callable[[], datetime]
IdSource = Callable[[], str]


def utc_second(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _system_clock() -> datetime:
    return datetime.now(timezone.utc)


def _uuid4() -> str:
    return str(uuidlib.uuid4())


@dataclass(frozen=True)
class DatastreamSpec:
    mime_type: str
    source: model.Provision
    created: Optional[str] = None
    format_id: Optional[str] = None
    extra_locations: tuple = ()
    embed_policy: str = "by-ref"

    def __post_init__(self) -> None:
        object.__setattr__(self, "extra_locations", tuple(self.extra_locations))
        if self.embed_policy not in EMBED_POLICIES:
            raise ManifestError(f"embed policy must be one of {EMBED_POLICIES}")
        if self.embed_policy in ("by-ref", "both") and not isinstance(
                self.source, model.ByReference):
            raise ManifestError("a by-ref embed policy requires a by-reference source")


@dataclass(frozen=True)
class AssetManifest:
    content_id: str
    metadata_blocks: tuple = ()  # (label, XmlNode) pairs
    datastreams: tuple = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "metadata_blocks", tuple(self.metadata_blocks))
        object.__setattr__(self, "datastreams", tuple(self.datastreams))
        if not is_absolute_uri(self.content_id):
            raise ManifestError(f"content id must be an absolute URI: {self.content_id!r}")
        if not self.metadata_blocks and not self.datastreams:
            raise ManifestError("manifest carries neither datastreams nor metadata")

    @classmethod
    def from_json_bytes(cls, data: bytes) -> "AssetManifest":
        try:
            raw = json.loads(data)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"manifest is not valid JSON: {exc}") from None
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "AssetManifest":
        if not isinstance(raw, dict):
            raise ManifestError("manifest must be a JSON object")
        metadata = []
        for block in raw.get("metadata", []):
            label = block.get("label", "")
            metadata.append((label, _parse_xml_block(block.get("xml", ""))))
        streams = []
        for ds in raw.get("datastreams", []):
            streams.append(DatastreamSpec(
                mime_type=ds.get("mime_type", ""),
                source=_parse_source(ds),
                created=ds.get("created"),
                format_id=ds.get("format_id"),
                extra_locations=tuple(ds.get("extra_locations", [])),
                embed_policy=ds.get("embed", "by-ref"),
            ))
        return cls(content_id=raw.get("content_id", ""),
                   metadata_blocks=tuple(metadata), datastreams=tuple(streams))


def _parse_xml_block(text: str) -> XmlNode:
    if not text:
        raise ManifestError("metadata block lacks its XML payload")
    wrapped = f"<didlkit-block>{text}</didlkit-block>".encode("utf-8")
    try:
        root = codec._read_xml(wrapped)
    except codec._Rejected as exc:
        raise ManifestError(f"metadata block is not well-formed XML: {exc}") from None
    elements = [c for c in root.content if isinstance(c, XmlNode)]
    if len(elements) != 1:
        raise ManifestError("metadata block must hold exactly one element")
    return elements[0]


def _parse_source(ds: dict) -> model.Provision:
    supplied = [key for key in ("ref", "base64", "xml") if ds.get(key) is not None]
    if len(supplied) != 1:
        raise ManifestError("datastream must supply exactly one of ref/base64/xml")
    if "ref" in supplied:
        uri = ds["ref"]
        if not is_absolute_uri(uri):
            raise ManifestError(f"datastream ref must be an absolute URI: {uri!r}")
        return model.ByReference(uri)
    if "base64" in supplied:
        return model.ByValueText("".join(ds["base64"].split()))
    return model.ByValueXml((_parse_xml_block(ds["xml"]),))


@dataclass(frozen=True)
class PackageHeader:
    package_id: str
    created: str
    content_ids: tuple


@dataclass(frozen=True)
class PackageRecord:
    package_id: str
    created: str
    document_bytes: bytes
    content_ids: tuple
    item_xml_ids: tuple


# ---------------------------------------------------------------------------
# Document construction


def _admin_descriptor(ds: DatastreamSpec) -> Optional[model.Descriptor]:
    children = []
    if ds.format_id is not None:
        children.append(element(DC_NS, "format", None, (ds.format_id,)))
    if ds.created is not None:
        children.append(element(DCTERMS_NS, "created", None, (ds.created,)))
    if not children:
        return None
    stmt = model.Statement(
        mime_type="text/xml; charset=UTF-8",
        provision=model.ByValueXml((element(ADMIN_NS, "Admin", None, tuple(children)),)))
    return model.Descriptor(statements=(stmt,))


def _datastream_source_resource(ds: DatastreamSpec) -> model.Resource:
    if isinstance(ds.source, model.ByValueText):
        return model.Resource(mime_type=ds.mime_type, provision=ds.source, encoding="base64")
    return model.Resource(mime_type=ds.mime_type, provision=ds.source)


def _datastream_resources(ds: DatastreamSpec, fetcher) -> tuple:
    from didlkit import resourceio
    resources = []
    if ds.embed_policy in ("by-ref", "both"):
        resources.append(model.Resource(mime_type=ds.mime_type, provision=ds.source))
        for extra in ds.extra_locations:
            resources.append(model.Resource(mime_type=ds.mime_type,
                                            provision=model.ByReference(extra)))
    if ds.embed_policy in ("by-value", "both"):
        data = resourceio.materialize(_datastream_source_resource(ds), fetcher)
        resources.append(resourceio.embed_by_value(data, ds.mime_type))
        if ds.embed_policy == "by-value":
            for extra in ds.extra_locations:
                resources.append(model.Resource(mime_type=ds.mime_type,
                                                provision=model.ByReference(extra)))
    return tuple(resources)


def build_package_document(manifest: AssetManifest, *,
                           package_id: Optional[str] = None,
                           created: Optional[str] = None,
                           fetcher=None,
                           id_source: Optional[IdSource] = None,
                           seal: bool = True) -> model.DidlDocument:
    """Assemble the package document for a manifest.

    With `seal` set, each component gains a digest descriptor, which
    requires every datastream to be materializable through `fetcher`.
    """
    ids = id_source or _uuid4
    descriptors = [dii.identifier_descriptor(manifest.content_id)]
    for _, block in manifest.metadata_blocks:
        stmt = model.Statement(mime_type="text/xml; charset=UTF-8",
                               provision=model.ByValueXml((block,)))
        descriptors.append(model.Descriptor(statements=(stmt,)))

    components = []
    for ds in manifest.datastreams:
        comp = model.Component(
            resources=_datastream_resources(ds, fetcher),
            xml_id=f"uuid-{ids()}",
            descriptors=tuple(d for d in (_admin_descriptor(ds),) if d is not None),
        )
        if seal:
            comp = integrity.seal_component(comp, fetcher)
        components.append(comp)

    item = model.Item(xml_id=f"uuid-{ids()}", descriptors=tuple(descriptors),
                      children=tuple(components))
    return model.DidlDocument(root_entities=(item,), document_id=package_id,
                              document_created=created)


# ---------------------------------------------------------------------------
# The store


@dataclass
class _Entry:
    created: str
    content_ids: tuple
    item_xml_ids: tuple


class PackageStore:
    """File-backed package store; see the module docstring for the layout."""

    def __init__(self, root: str | Path, *, authority: str = DEFAULT_AUTHORITY,
                 durable: bool = True):
        self.root = Path(root)
        self.authority = authority
        self.durable = durable
        self._write_lock = threading.Lock()
        self._entries: dict[str, _Entry] = {}
        self._by_content: dict[str, list] = {}
        self._order: list = []  # sorted (created, package_id)
        self._last_created = ""
        self.packages_dir = self.root / "packages"
        self.index_path = self.root / "index.log"
        self.tmp_dir = self.root / "tmp"
        self._open()

    # -- startup -----------------------------------------------------------

    def _open(self) -> None:
        self.packages_dir.mkdir(parents=True, exist_ok=True)
        self.tmp_dir.mkdir(parents=True, exist_ok=True)
        self._truncate_torn_tail()
        if self.index_path.exists():
            with self.index_path.open("rb") as fh:
                for line in fh:
                    self._replay_line(line.rstrip(b"\n"))
        self._collect_garbage()

    def _truncate_torn_tail(self) -> None:
        if not self.index_path.exists():
            return
        data = self.index_path.read_bytes()
        if data and not data.endswith(b"\n"):
            keep = data.rfind(b"\n") + 1
            with self.index_path.open("r+b") as fh:
                fh.truncate(keep)

    def _replay_line(self, line: bytes) -> None:
        if not line:
            return
        parts = line.decode("utf-8").split("\t")
        if len(parts) != 4:
            raise StoreError(f"corrupt index line: {line!r}")
        created, package_id, contents, items = parts
        content_ids = tuple(_unq(c) for c in contents.split(" ") if c)
        item_ids = tuple(_unq(c) for c in items.split(" ") if c)
        self._register(package_id, created, content_ids, item_ids)

    def _register(self, package_id: str, created: str, content_ids: tuple,
                  item_ids: tuple) -> None:
        self._entries[package_id] = _Entry(created, content_ids, item_ids)
        for cid in set(content_ids):
            self._by_content.setdefault(cid, []).append(package_id)
        bisect.insort(self._order, (created, package_id))
        if created > self._last_created:
            self._last_created = created

    def _collect_garbage(self) -> None:
        for stray in self.tmp_dir.glob("*"):
            stray.unlink(missing_ok=True)
        # keyed by uuid, not recomputed package id: committed files must
        # survive reopening under a different authority
        indexed = {self._uuid_of(pid) for pid in self._entries}
        for path in self.packages_dir.glob("*/*.didl.xml"):
            if path.name[:-len(".didl.xml")] not in indexed:
                path.unlink(missing_ok=True)

    # -- identifiers ---------------------------------------------------------

    def _package_id_for(self, uuid: str) -> str:
        return f"info:{self.authority}/i/{uuid}"

    def _uuid_of(self, package_id: str) -> str:
        marker = "/i/"
        if marker not in package_id:
            raise PackageNotFoundError(f"not a package identifier: {package_id!r}")
        return package_id.rsplit(marker, 1)[1]

    def _path_for(self, package_id: str) -> Path:
        uuid = self._uuid_of(package_id)
        return self.packages_dir / uuid[:2] / f"{uuid}.didl.xml"

    # -- writes --------------------------------------------------------------

    def ingest(self, manifest: AssetManifest, *, fetcher=None,
               clock: Optional[Clock] = None, id_source: Optional[IdSource] = None) -> str:
        """Validate, persist, and index one package; returns its identifier.

        Nothing is persisted if validation fails. The write becomes visible
        atomically when its index line is committed.
        """
        ids = id_source or _uuid4
        with self._write_lock:
            package_uuid = ids()
            package_id = self._package_id_for(package_uuid)
            if package_id in self._entries or self._path_for(package_id).exists():
                raise IdCollisionError(f"identifier source repeated {package_id}")
            created = utc_second((clock or _system_clock)())
            if created < self._last_created:
                created = self._last_created

            doc = build_package_document(manifest, package_id=package_id,
                                         created=created, fetcher=fetcher, id_source=ids)
            report = validator.validate(doc)
            if not report.passed:
                raise ManifestError("document failed validation; nothing persisted:\n"
                                    + report.to_text())
            payload = codec.canonical_bytes(doc)
            content_ids = tuple(i.value for i in dii.extract_identifiers(doc))
            item_ids = tuple(node.xml_id for _, node in model.iter_with_paths(doc)
                             if isinstance(node, model.Item) and node.xml_id)

            final = self._path_for(package_id)
            final.parent.mkdir(parents=True, exist_ok=True)
            tmp = self.tmp_dir / f"{package_uuid}.tmp"
            with tmp.open("wb") as fh:
                fh.write(payload)
                fh.flush()
                if self.durable:
                    os.fsync(fh.fileno())
            os.replace(tmp, final)

            line = "\t".join((created, package_id,
                              " ".join(_q(c) for c in content_ids),
                              " ".join(_q(i) for i in item_ids))) + "\n"
            with self.index_path.open("ab") as fh:
                if fcntl is not None:
                    fcntl.flock(fh.fileno(), fcntl.LOCK_EX)
                fh.write(line.encode("utf-8"))
                fh.flush()
                if self.durable:
                    os.fsync(fh.fileno())
            self._register(package_id, created, content_ids, item_ids)
            return package_id

    # -- reads ---------------------------------------------------------------

    def __len__(self) -> int:
        return len(self._entries)

    def get_package(self, package_id: str) -> PackageRecord:
        entry = self._entries.get(package_id)
        if entry is None:
            raise PackageNotFoundError(f"no such package: {package_id}")
        try:
            payload = self._path_for(package_id).read_bytes()
        except OSError as exc:
            raise StoreError(f"package file unreadable: {exc}") from None
        return PackageRecord(package_id=package_id, created=entry.created,
                             document_bytes=payload, content_ids=entry.content_ids,
                             item_xml_ids=entry.item_xml_ids)

    def resolve_content(self, content_id: str) -> list:
        """(package_id, created) for every package carrying the content id,
        newest first; ties break on package id ascending."""
        hits = self._by_content.get(content_id, [])
        rows = [(pid, self._entries[pid].created) for pid in hits]
        rows.sort(key=lambda r: (_desc(r[1]), r[0]))
        return rows

    def get_fragment(self, package_id: str, xml_id: str) -> bytes:
        record = self.get_package(package_id)
        result = codec.parse_didl(record.document_bytes)
        if result.document is None:
            raise StoreError(f"stored document unparseable: {package_id}")
        node = model.find_by_id(result.document, xml_id)
        if node is None:
            raise FragmentNotFoundError(f"{package_id} has no element with ID {xml_id!r}")
        return codec.serialize_fragment(node)

    def list_packages(self, from_: Optional[str] = None, until: Optional[str] = None,
                      after: Optional[str] = None, page_size: int = 100) -> tuple:
        """One page of package headers ordered by (created, package id).

        Bounds are inclusive; `after` is an opaque cursor from the previous
        page. Returns (headers, next_cursor).
        """
        if from_ is not None and until is not None and from_ > until:
            raise StoreError("window is empty: from > until")
        if page_size < 1:
            raise StoreError("page size must be positive")
        start = 0
        if after is not None:
            start = bisect.bisect_right(self._order, _decode_cursor(after))
        elif from_ is not None:
            start = bisect.bisect_left(self._order, (from_, ""))
        rows = []
        index = start
        while index < len(self._order) and len(rows) < page_size:
            created, pid = self._order[index]
            if until is not None and created > until:
                break
            if from_ is None or created >= from_:
                rows.append(PackageHeader(pid, created, self._entries[pid].content_ids))
            index += 1
        more = index < len(self._order) and (
            until is None or self._order[index][0] <= until)
        cursor = _encode_cursor(self._order[index - 1]) if rows and more else None
        return rows, cursor


def _q(value: str) -> str:
    import urllib.parse
    return urllib.parse.quote(value, safe=":/?#[]@!$&'()*+,;=-._~")


def _unq(value: str) -> str:
    import urllib.parse
    return urllib.parse.unquote(value)


def _desc(created: str) -> tuple:
    # lexicographically inverted timestamp so (desc created, asc id) sorts flat
    return tuple(-ord(c) for c in created)


_CURSOR_TAG = "didlkit1"


def _encode_cursor(position: tuple) -> str:
    raw = json.dumps([_CURSOR_TAG, position[0], position[1]]).encode("utf-8")
    return base64.urlsafe_b64encode(raw).decode("ascii").rstrip("=")


def _decode_cursor(cursor: str) -> tuple:
    try:
        padded = cursor + "=" * (-len(cursor) % 4)
        tag, created, package_id = json.loads(base64.urlsafe_b64decode(padded))
        if tag != _CURSOR_TAG:
            raise ValueError("wrong tag")
        return (created, package_id)
    except (ValueError, TypeError) as exc:
        raise BadCursorError(f"unusable resumption cursor: {exc}") from None
