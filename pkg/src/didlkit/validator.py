"""Rule engine for the constraints an XML grammar cannot express.

Shallow rules inspect the tree only; the one deep rule (R9) materializes
payloads and therefore runs only when a fetcher is supplied. Problems are
findings in a report, never exceptions; a report passes when it carries no
error-severity findings (warnings are advisory).
"""

from __future__ import annotations

import json
import re
import urllib.parse
from dataclasses import dataclass
from didlkit import codec, model, resourceio
from didlkit.errors import DecodeError, FetchError
from didlkit.namespaces import DEFAULT_EXT_NS, DII_NS
from didlkit.xmltree import all_text, get_attr

SHALLOW = "shallow"
DEEP = "deep"


@dataclass(frozen=True)
class Rule:
    id: str
    severity: str
    description: str
    mode: str


_CATALOG = (
    Rule("R1", "error", "resource/statement supplies exactly one provision", SHALLOW),
    Rule("R2", "error", "encoding attribute is 'base64' and the payload decodes", SHALLOW),
    Rule("R3", "error", "mimeType present and well-formed on every resource/statement", SHALLOW),
    Rule("R4", "error", "component binds at least one resource, all of one MIME type", SHALLOW),
    Rule("R5", "error", "containers hold items/containers; items hold items/components", SHALLOW),
    Rule("R6", "error", "XML IDs are unique within the document", SHALLOW),
    Rule("R6b", "error", "annotation targets resolve to an existing XML ID", SHALLOW),
    Rule("R7", "error", "identifier statements hold a single absolute URI", SHALLOW),
    Rule("R8", "error", "document identifier, when present, is an absolute URI", SHALLOW),
    Rule("R9", "error", "resources within one component are bit-equivalent", DEEP),
    Rule("R10", "error", "contentEncoding tokens are supported and not repeated", SHALLOW),
    Rule("W1", "warning", "item declares neither a component nor a sub-item", SHALLOW),
)

_RULE_ORDER = {rule.id: i for i, rule in enumerate(_CATALOG)}

# Lenient-parse codes that stand in for rules when the offending structure
# cannot survive binding.
_DIAGNOSTIC_RULE_MAP = {
    codec.E_CONTAINMENT: "R5",
    codec.E_EMPTY_COMPONENT: "R4",
    codec.E_PROVISION: "R1",
}

_MIME_RE = re.compile(r"^[!#$%&'*+.^_`|~0-9A-Za-z-]+/[!#$%&'*+.^_`|~0-9A-Za-z-]+"
                      r"(\s*;.*)?$")


def rule_catalog() -> tuple:
    """The static rule catalog, ordered by rule id."""
    return _CATALOG


def is_absolute_uri(value: str) -> bool:
    if not value or any(c.isspace() for c in value):
        return False
    try:
        parts = urllib.parse.urlsplit(value)
    except ValueError:
        return False
    return bool(parts.scheme)


@dataclass(frozen=True)
class Finding:
    rule: str
    severity: str
    path: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple

    @property
    def passed(self) -> bool:
        return not any(f.severity == "error" for f in self.findings)

    def to_text(self) -> str:
        lines = [f"{f.severity} {f.rule} {f.path} {f.message}" for f in self.findings]
        return "\n".join(lines) + ("\n" if lines else "")

    def to_json_dict(self) -> dict:
        return {
            "passed": self.passed,
            "findings": [
                {"rule": f.rule, "severity": f.severity, "path": f.path, "message": f.message}
                for f in self.findings
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"


def _sorted_report(findings: list) -> ValidationReport:
    order = sorted(findings,
                   key=lambda f: (model.path_key(f.path), _RULE_ORDER.get(f.rule, 1 << 20), f.rule))
    return ValidationReport(tuple(order))


def validate(doc: model.DidlDocument, fetcher=None) -> ValidationReport:
    """Apply the rule catalog to a bound document.

    Structural rules R1/R5 cannot fail here (the model enforces them); they
    surface through :func:`validate_bytes` on raw documents instead.
    """
    findings: list[Finding] = []
    add = lambda rule, path, message, severity="error": findings.append(
        Finding(rule, severity, path, message))

    if doc.document_id is not None and not is_absolute_uri(doc.document_id):
        add("R8", "/", f"document identifier is not an absolute URI: {doc.document_id!r}")

    known_ids = {xml_id for _, xml_id in model.collect_xml_ids(doc)}
    seen_ids: dict[str, str] = {}

    for path, node in model.iter_with_paths(doc):
        xml_id = getattr(node, "xml_id", None)
        if xml_id is not None:
            if xml_id in seen_ids:
                add("R6", path, f"XML ID {xml_id!r} already used at {seen_ids[xml_id]}")
            else:
                seen_ids[xml_id] = path

        if isinstance(node, (model.Statement, model.Resource)):
            _check_payload(node, path, add)
        elif isinstance(node, model.Component):
            mimes = sorted({r.mime_type for r in node.resources})
            if len(mimes) > 1:
                add("R4", path, f"resources in one component must share a MIME type, got {mimes}")
            if fetcher is not None:
                _check_equivalence(node, path, fetcher, add)
        elif isinstance(node, model.Annotation):
            if node.target not in known_ids:
                add("R6b", path, f"annotation target {node.target!r} resolves to no XML ID")
        elif isinstance(node, model.Item):
            if not node.children:
                add("W1", path, "item holds neither a component nor a sub-item", "warning")

        if isinstance(node, model.Statement):
            root = model.statement_xml_root(node)
            if root is not None and root.ns == DII_NS and root.local in ("Identifier",
                                                                         "RelatedIdentifier"):
                value = all_text(root).strip()
                if not is_absolute_uri(value):
                    add("R7", path, f"identifier statement holds no absolute URI: {value!r}")
                if root.local == "RelatedIdentifier":
                    rel = get_attr(root, None, "relationshipType")
                    if rel is not None and not is_absolute_uri(rel):
                        add("R7", path, f"relationship type is not an absolute URI: {rel!r}")

    return _sorted_report(findings)


def _check_payload(node, path: str, add) -> None:
    if not node.mime_type:
        add("R3", path, "mandatory mimeType is missing")
    elif not _MIME_RE.match(node.mime_type):
        add("R3", path, f"mimeType is not a media type: {node.mime_type!r}")

    if node.encoding is not None:
        if node.encoding != "base64":
            add("R2", path, f"encoding attribute must be 'base64', got {node.encoding!r}")
        elif not isinstance(node.provision, model.ByValueText):
            add("R2", path, "encoding='base64' requires an inline text payload")
        else:
            try:
                resourceio._decode_base64(node.provision.text)
            except DecodeError as exc:
                add("R2", path, str(exc))

    tokens = node.content_encoding
    unsupported = [t for t in tokens if t not in resourceio.SUPPORTED_CONTENT_ENCODINGS]
    if unsupported:
        add("R10", path, f"unsupported contentEncoding tokens: {unsupported}")
    elif len(set(tokens)) != len(tokens):
        add("R10", path, f"repeated contentEncoding tokens: {list(tokens)}")


def _check_equivalence(node: model.Component, path: str, fetcher, add) -> None:
    try:
        report = resourceio.check_component_equivalence(node, fetcher)
    except (FetchError, DecodeError) as exc:
        add("R9-FETCH", path, f"cannot materialize component for equivalence check: {exc}")
        return
    if not report.equivalent:
        digests = ", ".join(f"{path}{rel}={digest}" for rel, digest in report.digests)
        add("R9", path, f"resources are not bit-equivalent: {digests}")


def validate_bytes(data: bytes, fetcher=None, *, ext_ns: str = DEFAULT_EXT_NS) -> ValidationReport:
    """Validate raw document bytes.

    Binds leniently so that structural violations become rule findings
    (containment -> R5, resource-less components -> R4, double provisions ->
    R1) instead of refusals; whatever cannot be mapped to a rule keeps its
    parse diagnostic code. Then applies :func:`validate` to the surviving
    tree.
    """
    result = codec.parse_didl_lenient(data, ext_ns=ext_ns)
    findings = []
    for diag in result.diagnostics:
        if diag.code in (codec.E_MIMETYPE, codec.E_MIXED_MIME):
            continue  # the bound tree carries these; R3/R4 report them once
        rule = _DIAGNOSTIC_RULE_MAP.get(diag.code, diag.code)
        severity = "warning" if diag.severity == codec.WARNING else "error"
        findings.append(Finding(rule, severity, diag.path, diag.message))
    if result.document is not None:
        findings.extend(validate(result.document, fetcher).findings)
    return _sorted_report(findings)
