"""Materialize resource and statement payloads to bytes.

Covers base64 decoding, removal of applied content-encodings, by-reference
retrieval through a pluggable fetcher, and the bit-equivalence check that
every component is supposed to satisfy across its resources.
"""

from __future__ import annotations

import base64
import binascii
import gzip
import hashlib
import urllib.error
import urllib.parse
import urllib.request
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Protocol

from didlkit import codec, model
from didlkit.errors import (DecodeError, FetchError, NonDigitalResourceError,
                            UnsupportedEncodingError)

SUPPORTED_CONTENT_ENCODINGS = ("gzip", "deflate")
NON_DEREFERENCEABLE_SCHEMES = ("urn",)
DEFAULT_MAX_BYTES = 256 * 1024 * 1024
DEFAULT_TIMEOUT = 30.0
DEFAULT_MAX_REDIRECTS = 5


class Fetcher(Protocol):
    def fetch(self, uri: str) -> bytes: ...


class LocalFetcher:
    """Maps ``scheme://host/path`` to ``<root>/host/path`` on disk."""

    def __init__(self, root: str | Path, max_bytes: int = DEFAULT_MAX_BYTES):
        self.root = Path(root)
        self.max_bytes = max_bytes

    def fetch(self, uri: str) -> bytes:
        parts = urllib.parse.urlsplit(uri)
        if not parts.scheme or not parts.netloc:
            raise FetchError(f"cannot map non-network URI to a file: {uri}", uri)
        rel = Path(parts.netloc) / parts.path.lstrip("/")
        target = (self.root / rel).resolve()
        if not target.is_relative_to(self.root.resolve()):
            raise FetchError(f"reference escapes the fetch root: {uri}", uri)
        try:
            if target.stat().st_size > self.max_bytes:
                raise FetchError(f"payload exceeds size cap: {uri}", uri)
            return target.read_bytes()
        except OSError as exc:
            raise FetchError(f"cannot read {uri}: {exc}", uri) from None


class HttpFetcher:
    """Streams GET responses with a redirect limit and a size cap."""

    def __init__(self, timeout: float = DEFAULT_TIMEOUT, max_bytes: int = DEFAULT_MAX_BYTES,
                 max_redirects: int = DEFAULT_MAX_REDIRECTS):
        self.timeout = timeout
        self.max_bytes = max_bytes
        self.max_redirects = max_redirects

    def fetch(self, uri: str) -> bytes:
        current = uri
        for _ in range(self.max_redirects + 1):
            scheme = urllib.parse.urlsplit(current).scheme
            if scheme not in ("http", "https"):
                raise FetchError(f"unsupported scheme {scheme!r}: {current}", uri)
            request = urllib.request.Request(current, method="GET")
            opener = urllib.request.build_opener(_NoRedirect)
            try:
                response = opener.open(request, timeout=self.timeout)
            except urllib.error.HTTPError as exc:
                if exc.code in (301, 302, 303, 307, 308):
                    location = exc.headers.get("Location")
                    exc.close()
                    if not location:
                        raise FetchError(f"redirect without location: {current}", uri) from None
                    current = urllib.parse.urljoin(current, location)
                    continue
                raise FetchError(f"HTTP {exc.code} fetching {current}", uri) from None
            except (urllib.error.URLError, OSError) as exc:
                raise FetchError(f"cannot fetch {current}: {exc}", uri) from None
            with response:
                chunks = []
                total = 0
                while True:
                    chunk = response.read(1 << 16)
                    if not chunk:
                        return b"".join(chunks)
                    total += len(chunk)
                    if total > self.max_bytes:
                        raise FetchError(f"payload exceeds size cap: {uri}", uri)
                    chunks.append(chunk)
        raise FetchError(f"too many redirects fetching {uri}", uri)


class _NoRedirect(urllib.request.HTTPRedirectHandler):
    def redirect_request(self, req, fp, code, msg, headers, newurl):
        return None


class ReplayFetcher:
    """Deterministic in-memory fetcher for tests; optionally records from
    another fetcher on first use."""

    def __init__(self, mapping: Optional[Mapping[str, bytes]] = None,
                 upstream: Optional[Fetcher] = None):
        self.mapping = dict(mapping or {})
        self.upstream = upstream
        self.requests: list[str] = []

    def record(self, uri: str, data: bytes) -> None:
        self.mapping[uri] = data

    def fetch(self, uri: str) -> bytes:
        self.requests.append(uri)
        if uri in self.mapping:
            return self.mapping[uri]
        if self.upstream is not None:
            data = self.upstream.fetch(uri)
            self.mapping[uri] = data
            return data
        raise FetchError(f"no recorded payload for {uri}", uri)


def _decode_base64(text: str) -> bytes:
    compact = "".join(text.split())
    try:
        return base64.b64decode(compact, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise DecodeError(f"invalid base64 payload: {exc}") from None


def _remove_encoding(data: bytes, token: str) -> bytes:
    try:
        if token == "gzip":
            return gzip.decompress(data)
        if token == "deflate":
            return zlib.decompress(data)
    except (OSError, zlib.error, EOFError) as exc:
        raise DecodeError(f"cannot remove content-encoding {token!r}: {exc}") from None
    raise UnsupportedEncodingError(f"unsupported content-encoding token {token!r}")


def _apply_encoding(data: bytes, token: str) -> bytes:
    if token == "gzip":
        return gzip.compress(data, mtime=0)
    if token == "deflate":
        return zlib.compress(data)
    raise UnsupportedEncodingError(f"unsupported content-encoding token {token!r}")


def materialize(res: model.Resource | model.Statement, fetcher: Optional[Fetcher] = None, *,
                non_dereferenceable: tuple = NON_DEREFERENCEABLE_SCHEMES) -> bytes:
    """The payload as bytes of the MIME type the element declares.

    By-reference payloads go through the fetcher; inline base64 is decoded;
    inline XML is canonicalized to UTF-8. Content-encodings are then removed
    in reverse of the order they were applied.
    """
    provision = res.provision
    if isinstance(provision, model.ByReference):
        scheme = urllib.parse.urlsplit(provision.uri).scheme
        if scheme in non_dereferenceable:
            raise NonDigitalResourceError(
                f"scheme {scheme!r} denotes a non-digital referent: {provision.uri}",
                provision.uri)
        if fetcher is None:
            raise FetchError(f"no fetcher supplied for {provision.uri}", provision.uri)
        data = fetcher.fetch(provision.uri)
    elif isinstance(provision, model.ByValueText):
        if res.encoding == "base64":
            data = _decode_base64(provision.text)
        else:
            data = provision.text.encode("utf-8")
    else:
        data = codec.canonical_xml_payload(provision.content)
    for token in reversed(res.content_encoding):
        data = _remove_encoding(data, token)
    return data


def embed_by_value(data: bytes, mime_type: str, compress: Optional[str] = None) -> model.Resource:
    """Wrap bytes as an inline base64 resource; round-trips through
    :func:`materialize`."""
    payload = data
    content_encoding: tuple = ()
    if compress is not None:
        payload = _apply_encoding(data, compress)
        content_encoding = (compress,)
    return model.Resource(
        mime_type=mime_type,
        provision=model.ByValueText(base64.b64encode(payload).decode("ascii")),
        encoding="base64",
        content_encoding=content_encoding,
    )


@dataclass(frozen=True)
class EquivalenceReport:
    equivalent: bool
    digests: tuple  # ((component-relative path, sha-256 hex), ...)


def check_component_equivalence(comp: model.Component, fetcher: Optional[Fetcher] = None,
                                ) -> EquivalenceReport:
    """Materialize every resource of the component and compare bytes.

    Digest paths are relative to the component node. Materialization errors
    are re-raised annotated with the failing resource's relative path.
    """
    offset = len(comp.descriptors)
    digests = []
    payloads = []
    for i, res in enumerate(comp.resources):
        rel_path = f"/{offset + i}"
        try:
            data = materialize(res, fetcher)
        except (FetchError, DecodeError) as exc:
            exc.args = (f"resource at {rel_path}: {exc.args[0]}",) + exc.args[1:]
            raise
        payloads.append(data)
        digests.append((rel_path, hashlib.sha256(data).hexdigest()))
    equivalent = all(p == payloads[0] for p in payloads)
    return EquivalenceReport(equivalent=equivalent, digests=tuple(digests))
