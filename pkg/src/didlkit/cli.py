"""Operator command line.

Document commands (create, validate, inspect, seal, verify) run locally.
Store commands (ingest, get, resolve, fragment) work against a local store
directory (``--store`` or DIDLKIT_STORE) or, as thin HTTP clients, against
a running service (``--server`` or DIDLKIT_SERVER). ``serve`` starts the
service itself.

Data goes to stdout, diagnostics to stderr. Exit codes: 0 success, 1 failed
validation or verification, 2 usage error, 3 I/O or fetch error, 4 not
found. A file argument of ``-`` reads stdin.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional

import httpx

from didlkit import codec, integrity, repository, resourceio, validator
from didlkit.errors import (DidlkitError, FragmentNotFoundError, PackageNotFoundError)
from didlkit.service import schemas

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NOT_FOUND = 4


class _Failure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def main(argv: Optional[list] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args) or EXIT_OK
    except _Failure as failure:
        print(str(failure), file=sys.stderr)
        return failure.code
    except DidlkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="didlkit",
                                     description="work with DIDL documents and package stores")
    sub = parser.add_subparsers(dest="command")

    def fetch_opts(p):
        p.add_argument("--fetch-root", metavar="DIR",
                       help="resolve by-reference URIs under this directory")
        p.add_argument("--allow-http", action="store_true",
                       help="permit fetching http(s) references (off by default)")

    def store_opts(p):
        p.add_argument("--store", default=os.environ.get("DIDLKIT_STORE"),
                       help="store root directory (env DIDLKIT_STORE)")
        p.add_argument("--server", default=os.environ.get("DIDLKIT_SERVER"),
                       help="service base URL for thin-client mode (env DIDLKIT_SERVER)")

    p = sub.add_parser("create", help="build a package document from a manifest")
    p.add_argument("manifest")
    p.add_argument("-o", "--output", help="write the document here instead of stdout")
    p.add_argument("--seal", action="store_true", help="add integrity digests per component")
    fetch_opts(p)
    p.set_defaults(func=_cmd_create)

    p = sub.add_parser("validate", help="validate a document, exit 1 on failure")
    p.add_argument("file")
    p.add_argument("--deep", action="store_true", help="also check resource bit-equivalence")
    p.add_argument("--strict", action="store_true", help="treat warnings as errors")
    p.add_argument("--json", action="store_true", dest="as_json")
    fetch_opts(p)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("inspect", help="identifiers, relationships, and components")
    p.add_argument("file")
    p.add_argument("--json", action="store_true", dest="as_json")
    fetch_opts(p)
    p.set_defaults(func=_cmd_inspect)

    p = sub.add_parser("ingest", help="ingest a manifest into a store")
    p.add_argument("manifest")
    store_opts(p)
    fetch_opts(p)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("get", help="print a stored package document")
    p.add_argument("package_id")
    store_opts(p)
    p.set_defaults(func=_cmd_get)

    p = sub.add_parser("resolve", help="list package versions of a content identifier")
    p.add_argument("content_id")
    p.add_argument("--json", action="store_true", dest="as_json")
    store_opts(p)
    p.set_defaults(func=_cmd_resolve)

    p = sub.add_parser("fragment", help="print one element of a stored package")
    p.add_argument("package_id")
    p.add_argument("xml_id")
    store_opts(p)
    p.set_defaults(func=_cmd_fragment)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--store", default=os.environ.get("DIDLKIT_STORE"), required=False)
    p.add_argument("--port", type=int, default=int(os.environ.get("DIDLKIT_PORT", "8431")))
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--base-url", default=os.environ.get("DIDLKIT_BASE_URL"))
    p.add_argument("--repository-name",
                   default=os.environ.get("DIDLKIT_REPOSITORY_NAME", "didlkit repository"))
    p.add_argument("--admin-email", default="admin@localhost")
    p.add_argument("--page-size", type=int, default=100)
    fetch_opts(p)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("seal", help="add an integrity block to a document")
    p.add_argument("file")
    p.add_argument("-o", "--output")
    p.add_argument("--key", help="file holding a hex-encoded Ed25519 private key")
    p.add_argument("--key-id")
    p.add_argument("--components", action="store_true",
                   help="also seal every component (requires materializable payloads)")
    fetch_opts(p)
    p.set_defaults(func=_cmd_seal)

    p = sub.add_parser("verify", help="check integrity blocks, exit 1 unless all ok")
    p.add_argument("file")
    p.add_argument("--keyring", help="JSON file of key-id to hex public key")
    fetch_opts(p)
    p.set_defaults(func=_cmd_verify)

    return parser


# ---------------------------------------------------------------------------
# helpers


def _read_input(name: str) -> bytes:
    if name == "-":
        return sys.stdin.buffer.read()
    try:
        return Path(name).read_bytes()
    except OSError as exc:
        raise _Failure(EXIT_IO, f"cannot read {name}: {exc}") from None


def _write_output(data: bytes, output: Optional[str]) -> None:
    if output and output != "-":
        Path(output).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()


class _ChainFetcher:
    def __init__(self, fetchers):
        self.fetchers = fetchers

    def fetch(self, uri: str) -> bytes:
        last: Exception | None = None
        for fetcher in self.fetchers:
            try:
                return fetcher.fetch(uri)
            except DidlkitError as exc:
                last = exc
        raise last if last else resourceio.FetchError(f"no fetcher for {uri}", uri)


def _build_fetcher(args) -> Optional[object]:
    fetchers = []
    if getattr(args, "fetch_root", None):
        fetchers.append(resourceio.LocalFetcher(args.fetch_root))
    if getattr(args, "allow_http", False):
        fetchers.append(resourceio.HttpFetcher())
    if not fetchers:
        return None
    return fetchers[0] if len(fetchers) == 1 else _ChainFetcher(fetchers)


def _parse_document(data: bytes):
    result = codec.parse_didl(data)
    if result.document is None:
        for diag in result.diagnostics:
            print(f"{diag.severity} {diag.code} {diag.path} {diag.message}", file=sys.stderr)
        raise _Failure(EXIT_FAILED, "document did not parse")
    return result.document


def _open_store(args) -> repository.PackageStore:
    if not args.store:
        raise _Failure(EXIT_USAGE, "a store is required (--store or DIDLKIT_STORE)")
    return repository.PackageStore(args.store)


def _client(server: str) -> httpx.Client:
    return httpx.Client(base_url=server, timeout=30.0)


def _server_request(server: str, method: str, path: str, **kwargs) -> httpx.Response:
    try:
        with _client(server) as client:
            response = client.request(method, path, **kwargs)
    except httpx.HTTPError as exc:
        raise _Failure(EXIT_IO, f"cannot reach {server}: {exc}") from None
    if response.status_code == 404:
        raise _Failure(EXIT_NOT_FOUND, response.json().get("detail", "not found"))
    if response.status_code >= 400:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        raise _Failure(EXIT_FAILED, f"server refused: {detail}")
    return response


def _load_manifest(name: str) -> repository.AssetManifest:
    return repository.AssetManifest.from_json_bytes(_read_input(name))


# ---------------------------------------------------------------------------
# commands


def _cmd_create(args) -> int:
    manifest = _load_manifest(args.manifest)
    doc = repository.build_package_document(manifest, fetcher=_build_fetcher(args),
                                            seal=args.seal)
    _write_output(codec.serialize_didl(doc), args.output)
    return EXIT_OK


def _cmd_validate(args) -> int:
    fetcher = _build_fetcher(args) if args.deep else None
    if args.deep and fetcher is None:
        raise _Failure(EXIT_USAGE, "--deep requires --fetch-root and/or --allow-http")
    report = validator.validate_bytes(_read_input(args.file), fetcher=fetcher)
    if args.as_json:
        sys.stdout.write(report.to_json())
    else:
        sys.stdout.write(report.to_text())
    failed = not report.passed or (args.strict and report.findings)
    return EXIT_FAILED if failed else EXIT_OK


def _cmd_inspect(args) -> int:
    doc = _parse_document(_read_input(args.file))
    summary = schemas.inspect_document(doc, _build_fetcher(args))
    if args.as_json:
        print(json.dumps(summary.model_dump(), sort_keys=True, indent=2))
        return EXIT_OK
    if summary.document_id:
        print(f"document id: {summary.document_id}")
    if summary.document_created:
        print(f"created: {summary.document_created}")
    for entry in summary.identifiers:
        print(f"identifier {entry.value} on {entry.host}")
    for entry in summary.related:
        rel = f" ({entry.relationship_type})" if entry.relationship_type else ""
        print(f"related {entry.value}{rel} on {entry.host}")
    for triple in summary.relationships:
        print(f"triple {triple.subject} {triple.predicate} {triple.object}")
    for comp in summary.components:
        line = f"component {comp.path} mime={comp.mime_type} resources={comp.resources}"
        if comp.xml_id:
            line += f" id={comp.xml_id}"
        print(line)
        for rel, digest in (comp.digests or {}).items():
            print(f"  sha-256 {rel} {digest}")
    return EXIT_OK


def _cmd_ingest(args) -> int:
    if args.server:
        manifest_json = json.loads(_read_input(args.manifest))
        response = _server_request(args.server, "POST", "/packages", json=manifest_json)
        print(response.json()["package_id"])
        return EXIT_OK
    store = _open_store(args)
    package_id = store.ingest(_load_manifest(args.manifest), fetcher=_build_fetcher(args))
    print(package_id)
    return EXIT_OK


def _cmd_get(args) -> int:
    if args.server:
        response = _server_request(args.server, "GET", "/package/document",
                                   params={"package_id": args.package_id})
        _write_output(response.content, None)
        return EXIT_OK
    store = _open_store(args)
    try:
        record = store.get_package(args.package_id)
    except PackageNotFoundError as exc:
        raise _Failure(EXIT_NOT_FOUND, str(exc)) from None
    _write_output(record.document_bytes, None)
    return EXIT_OK


def _cmd_resolve(args) -> int:
    if args.server:
        response = _server_request(args.server, "GET", "/content",
                                   params={"content_id": args.content_id})
        rows = [(entry["package_id"], entry["created"]) for entry in response.json()]
    else:
        rows = _open_store(args).resolve_content(args.content_id)
    if args.as_json:
        print(json.dumps([{"package_id": pid, "created": created} for pid, created in rows],
                         sort_keys=True, indent=2))
    else:
        for pid, created in rows:
            print(f"{pid}\t{created}")
    return EXIT_OK


def _cmd_fragment(args) -> int:
    if args.server:
        response = _server_request(args.server, "GET", "/package/fragment",
                                   params={"package_id": args.package_id,
                                           "xml_id": args.xml_id})
        _write_output(response.content, None)
        return EXIT_OK
    store = _open_store(args)
    try:
        _write_output(store.get_fragment(args.package_id, args.xml_id), None)
    except (PackageNotFoundError, FragmentNotFoundError) as exc:
        raise _Failure(EXIT_NOT_FOUND, str(exc)) from None
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn
    from didlkit.service import create_app
    store = _open_store(args)
    base_url = args.base_url or f"http://{args.host}:{args.port}"
    app = create_app(store, base_url=base_url, repository_name=args.repository_name,
                     admin_email=args.admin_email, page_size=args.page_size,
                     fetcher=_build_fetcher(args))
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def _load_key(args):
    if not args.key:
        return None, None
    if not args.key_id:
        raise _Failure(EXIT_USAGE, "--key requires --key-id")
    try:
        raw = bytes.fromhex(Path(args.key).read_text().strip())
    except (OSError, ValueError) as exc:
        raise _Failure(EXIT_IO, f"cannot load key: {exc}") from None
    return raw, args.key_id


def _cmd_seal(args) -> int:
    doc = _parse_document(_read_input(args.file))
    key, key_id = _load_key(args)
    fetcher = _build_fetcher(args)
    if args.components:
        import didlkit.model as model
        for path, node in list(model.iter_with_paths(doc)):
            if isinstance(node, model.Component):
                sealed = integrity.seal_component(node, fetcher, key, key_id=key_id)
                doc = model.replace_node(doc, path, sealed)
    doc = integrity.seal_document(doc, key, key_id=key_id)
    _write_output(codec.serialize_didl(doc), args.output)
    return EXIT_OK


def _cmd_verify(args) -> int:
    doc = _parse_document(_read_input(args.file))
    keyring = {}
    if args.keyring:
        try:
            raw = json.loads(Path(args.keyring).read_text())
            keyring = {kid: bytes.fromhex(pub) for kid, pub in raw.items()}
        except (OSError, ValueError) as exc:
            raise _Failure(EXIT_IO, f"cannot load keyring: {exc}") from None
    import didlkit.model as model
    verdicts = [("document", integrity.verify_document(doc, keyring))]
    fetcher = _build_fetcher(args)
    for path, node in model.iter_with_paths(doc):
        if isinstance(node, model.Component) and integrity.component_block(node) is not None:
            verdicts.append((f"component {path}",
                             integrity.verify_component(node, fetcher, keyring)))
    for scope, verdict in verdicts:
        print(f"{scope}: {verdict.value}")
    all_ok = all(v is integrity.Verdict.OK for _, v in verdicts)
    return EXIT_OK if all_ok else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
