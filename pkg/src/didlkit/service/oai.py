"""Harvesting endpoint: a four-verb OAI-PMH 2.0 subset over the store.

Records are addressed by package identifier; the record datestamp is the
document's creation stamp, and the metadata payload embeds the stored
document verbatim (prefix ``didl``) or its first Dublin Core descriptor
(prefix ``oai_dc``, with a title-only stub when a package carries none).
List verbs page through the store with resumption tokens that encode the
window plus the store cursor, so a token alone continues a harvest.
"""

from __future__ import annotations

import base64
import json
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Callable, Mapping, Optional

from didlkit import codec, model
from didlkit.errors import BadCursorError, PackageNotFoundError
from didlkit.namespaces import DC_NS, OAI_DC_NS
from didlkit.repository import PackageStore

_TS_RE = re.compile(r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z$")
_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")

VERBS = ("GetRecord", "Identify", "ListIdentifiers", "ListRecords")
_VERB_ARGS = {
    "Identify": set(),
    "GetRecord": {"identifier", "metadataPrefix"},
    "ListRecords": {"from", "until", "metadataPrefix", "resumptionToken"},
    "ListIdentifiers": {"from", "until", "metadataPrefix", "resumptionToken"},
}

METADATA_PREFIXES = ("didl", "oai_dc")


@dataclass(frozen=True)
class OaiConfig:
    base_url: str = "http://localhost:8431"
    repository_name: str = "didlkit repository"
    admin_email: str = "admin@localhost"
    page_size: int = 100
    clock: Callable[[], datetime] = lambda: datetime.now(timezone.utc)

    @property
    def endpoint(self) -> str:
        return self.base_url.rstrip("/") + "/oai"


class _OaiError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def _esc(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;").replace('"', "&quot;"))


def handle_oai(params: Mapping[str, list], store: PackageStore, config: OaiConfig) -> bytes:
    """Serve one protocol request; `params` maps names to value lists so
    repeated arguments can be rejected. Always returns a response body."""
    lists = {k: list(v) for k, v in params.items()}
    try:
        verb, args = _check_arguments(lists)
        body = f"<{verb}>{_dispatch(verb, args, store, config)}</{verb}>"
        return _envelope(config, verb=verb, args=args, body=body)
    except _OaiError as err:
        echo_verb = None
        echo_args: dict = {}
        if err.code not in ("badVerb", "badArgument"):
            echo_verb = lists.get("verb", [None])[0]
            echo_args = {k: v[0] for k, v in lists.items() if k != "verb" and len(v) == 1}
        error = f'<error code="{err.code}">{_esc(str(err))}</error>'
        return _envelope(config, verb=echo_verb, args=echo_args, body=error)


def _check_arguments(lists: dict) -> tuple:
    verbs = lists.get("verb", [])
    if len(verbs) != 1 or verbs[0] not in VERBS:
        raise _OaiError("badVerb", "request must carry exactly one known verb")
    verb = verbs[0]
    allowed = _VERB_ARGS[verb]
    args = {}
    for name, values in lists.items():
        if name == "verb":
            continue
        if name not in allowed:
            raise _OaiError("badArgument", f"argument {name!r} is illegal for {verb}")
        if len(values) != 1:
            raise _OaiError("badArgument", f"argument {name!r} is repeated")
        args[name] = values[0]
    if verb == "GetRecord" and set(args) != {"identifier", "metadataPrefix"}:
        raise _OaiError("badArgument", "GetRecord requires identifier and metadataPrefix")
    if verb in ("ListRecords", "ListIdentifiers"):
        if "resumptionToken" in args:
            if len(args) != 1:
                raise _OaiError("badArgument", "resumptionToken is an exclusive argument")
        elif "metadataPrefix" not in args:
            raise _OaiError("badArgument", f"{verb} requires metadataPrefix")
    return verb, args


def _check_prefix(prefix: str) -> str:
    if prefix not in METADATA_PREFIXES:
        raise _OaiError("cannotDisseminateFormat",
                        f"metadata prefix {prefix!r} is not offered")
    return prefix


def _parse_stamp(value: str, name: str, is_until: bool) -> str:
    if _TS_RE.match(value):
        return value
    if _DATE_RE.match(value):
        return value + ("T23:59:59Z" if is_until else "T00:00:00Z")
    raise _OaiError("badArgument", f"{name} is not a UTC datestamp: {value!r}")


def _window(args: dict) -> tuple:
    from_ = until = None
    if "from" in args:
        from_ = _parse_stamp(args["from"], "from", is_until=False)
    if "until" in args:
        until = _parse_stamp(args["until"], "until", is_until=True)
    if "from" in args and "until" in args:
        if (_DATE_RE.match(args["from"]) is None) != (_DATE_RE.match(args["until"]) is None):
            raise _OaiError("badArgument", "from and until use different granularities")
    if from_ is not None and until is not None and from_ > until:
        raise _OaiError("badArgument", "from is later than until")
    return from_, until


def _dispatch(verb: str, args: dict, store: PackageStore, config: OaiConfig) -> str:
    if verb == "Identify":
        return _identify(store, config)
    if verb == "GetRecord":
        return _get_record(args, store)
    return _list(verb, args, store, config)


def _identify(store: PackageStore, config: OaiConfig) -> str:
    earliest = store._order[0][0] if len(store) else "1970-01-01T00:00:00Z"
    return (
        f"<repositoryName>{_esc(config.repository_name)}</repositoryName>"
        f"<baseURL>{_esc(config.endpoint)}</baseURL>"
        f"<protocolVersion>2.0</protocolVersion>"
        f"<adminEmail>{_esc(config.admin_email)}</adminEmail>"
        f"<earliestDatestamp>{earliest}</earliestDatestamp>"
        f"<deletedRecord>no</deletedRecord>"
        f"<granularity>YYYY-MM-DDThh:mm:ssZ</granularity>"
    )


def _metadata_payload(document_bytes: bytes, prefix: str, package_id: str) -> str:
    if prefix == "didl":
        text = document_bytes.decode("utf-8")
        if text.startswith("<?xml"):
            text = text.split("?>", 1)[1].lstrip("\n")
        return text.rstrip("\n")
    result = codec.parse_didl(document_bytes)
    if result.document is not None:
        for _, node in model.iter_with_paths(result.document):
            if not isinstance(node, model.Item):
                continue
            for descriptor in node.descriptors:
                for stmt in descriptor.statements:
                    root = model.statement_xml_root(stmt)
                    if root is not None and root.tag == (OAI_DC_NS, "dc"):
                        return codec.serialize_fragment(root).decode("utf-8")
            break
    return (f'<oai_dc:dc xmlns:oai_dc="{OAI_DC_NS}" xmlns:dc="{DC_NS}">'
            f"<dc:title>{_esc(package_id)}</dc:title></oai_dc:dc>")


def _record(package_id: str, created: str, payload: Optional[str]) -> str:
    header = (f"<header><identifier>{_esc(package_id)}</identifier>"
              f"<datestamp>{created}</datestamp></header>")
    if payload is None:
        return header
    return f"<record>{header}<metadata>{payload}</metadata></record>"


def _get_record(args: dict, store: PackageStore) -> str:
    prefix = _check_prefix(args["metadataPrefix"])
    try:
        record = store.get_package(args["identifier"])
    except PackageNotFoundError:
        raise _OaiError("idDoesNotExist",
                        f"no package {args['identifier']!r} in this repository") from None
    payload = _metadata_payload(record.document_bytes, prefix, record.package_id)
    return _record(record.package_id, record.created, payload)


def _list(verb: str, args: dict, store: PackageStore, config: OaiConfig) -> str:
    resumed = "resumptionToken" in args
    if resumed:
        prefix, from_, until, cursor = _decode_token(args["resumptionToken"])
    else:
        prefix = _check_prefix(args["metadataPrefix"])
        from_, until = _window(args)
        cursor = None
    try:
        headers, next_cursor = store.list_packages(from_=from_, until=until, after=cursor,
                                                   page_size=config.page_size)
    except BadCursorError as exc:
        raise _OaiError("badResumptionToken", str(exc)) from None
    if not headers and not resumed:
        raise _OaiError("noRecordsMatch", "no records in the requested window")

    pieces = []
    for header in headers:
        if verb == "ListIdentifiers":
            pieces.append(_record(header.package_id, header.created, None))
        else:
            record = store.get_package(header.package_id)
            pieces.append(_record(header.package_id, header.created,
                                  _metadata_payload(record.document_bytes, prefix,
                                                    header.package_id)))
    if next_cursor is not None:
        token = _encode_token(prefix, from_, until, next_cursor)
        pieces.append(f"<resumptionToken>{_esc(token)}</resumptionToken>")
    elif resumed:
        pieces.append("<resumptionToken/>")  # closes the token sequence
    return "".join(pieces)


def _encode_token(prefix: str, from_: Optional[str], until: Optional[str], cursor: str) -> str:
    raw = json.dumps([prefix, from_, until, cursor]).encode("utf-8")
    return base64.urlsafe_b64encode(raw).decode("ascii").rstrip("=")


def _decode_token(token: str) -> tuple:
    try:
        padded = token + "=" * (-len(token) % 4)
        prefix, from_, until, cursor = json.loads(base64.urlsafe_b64decode(padded))
        if prefix not in METADATA_PREFIXES:
            raise ValueError("unknown prefix")
        return prefix, from_, until, cursor
    except (ValueError, TypeError) as exc:
        raise _OaiError("badResumptionToken", f"unusable resumption token: {exc}") from None


def _envelope(config: OaiConfig, *, verb: Optional[str], args: dict | None = None,
              body: str) -> bytes:
    stamp = config.clock().astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    attrs = ""
    if verb:
        attrs = f' verb="{_esc(verb)}"'
        for name, value in sorted((args or {}).items()):
            attrs += f' {name}="{_esc(value)}"'
    text = (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        '<OAI-PMH xmlns="http://www.openarchives.org/OAI/2.0/"'
        ' xmlns:xsi="http://www.w3.org/2001/XMLSchema-instance"'
        ' xsi:schemaLocation="http://www.openarchives.org/OAI/2.0/'
        ' http://www.openarchives.org/OAI/2.0/OAI-PMH.xsd">'
        f"<responseDate>{stamp}</responseDate>"
        f"<request{attrs}>{_esc(config.endpoint)}</request>"
        f"{body}</OAI-PMH>\n"
    )
    return text.encode("utf-8")
