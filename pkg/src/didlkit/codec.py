"""Parsing and serialization between DIDL XML bytes and the model tree.

Parsing is total: any octet sequence yields either a document or at least
one fatal diagnostic, never an unhandled exception. Documents must be UTF-8
(a declaration of any other encoding is rejected), DTDs and external
entities are refused outright, and the first-edition Reference/Declarations
elements are hard errors.

Serialization is deterministic: namespace prefixes come from a fixed table
(generated ns1, ns2, ... for anything unknown, in first-use order), all
declarations sit on the root element, attributes are emitted in a canonical
order, and base64 payloads are re-wrapped at 76 columns. `serialize_didl`
pretty-prints structural elements; `canonical_bytes` emits no insignificant
whitespace at all, so equal trees produce equal bytes.

Whitespace handling is split by ownership: whitespace-only text between
structural DIDL elements is insignificant and dropped at parse, while the
interiors of foreign subtrees (document-info children, inline XML payloads,
conditional groups) are preserved verbatim and re-emitted untouched.
"""

from __future__ import annotations

import base64
import binascii
from dataclasses import dataclass, field
from typing import Optional
from xml.parsers import expat

from didlkit import model
from didlkit.errors import ModelError, SerializeError
from didlkit.namespaces import DEFAULT_EXT_NS, DIDL_NS, WELL_KNOWN_PREFIXES, XML_NS
from didlkit.xmltree import XmlComment, XmlNode, XmlPI, sort_attrs

FATAL = "fatal"
ERROR = "error"
WARNING = "warning"

# Diagnostic codes. Structural codes are fatal on a strict parse; the
# validator's lenient path downgrades most of them to rule findings.
E_XML = "E-XML"
E_DTD = "E-DTD"
E_ENCODING = "E-ENCODING"
E_ROOT = "E-ROOT"
E_REFERENCE_REMOVED = "E-REFERENCE-REMOVED"
E_DUPLICATE_ID = "E-DUPLICATE-ID"
E_EMPTY_ROOT = "E-EMPTY-ROOT"
E_EMPTY_CONTAINER = "E-EMPTY-CONTAINER"
E_EMPTY_COMPONENT = "E-EMPTY-COMPONENT"
E_EMPTY_DESCRIPTOR = "E-EMPTY-DESCRIPTOR"
E_CONTAINMENT = "E-CONTAINMENT"
E_PROVISION = "E-PROVISION"
E_MIXED_MIME = "E-MIXED-MIME"
E_MIMETYPE = "E-MIMETYPE"
E_STRUCTURE = "E-STRUCTURE"
W_DIDLINFO_TEXT = "W-DIDLINFO-TEXT"

_STRICT_FATAL = {
    E_XML, E_DTD, E_ENCODING, E_ROOT, E_REFERENCE_REMOVED, E_DUPLICATE_ID,
    E_EMPTY_ROOT, E_EMPTY_CONTAINER, E_EMPTY_COMPONENT, E_EMPTY_DESCRIPTOR,
    E_CONTAINMENT, E_PROVISION, E_MIXED_MIME, E_STRUCTURE,
}

# Lenient binding cannot recover from these; no tree means no findings pass.
_ALWAYS_FATAL = {E_XML, E_DTD, E_ENCODING, E_ROOT, E_REFERENCE_REMOVED}


@dataclass(frozen=True)
class ParseDiagnostic:
    code: str
    severity: str
    path: str
    message: str


@dataclass
class ParseResult:
    document: Optional[model.DidlDocument]
    diagnostics: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.document is not None


class _Rejected(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# Low-level XML reading


def _read_xml(data: bytes) -> XmlNode:
    """Bytes -> namespace-resolved tree; raises _Rejected on anything unfit."""
    if not isinstance(data, (bytes, bytearray)):
        raise _Rejected(E_XML, "input must be bytes")
    head = bytes(data[:4])
    if head[:2] in (b"\xff\xfe", b"\xfe\xff") or head in (b"\x00\x00\xfe\xff", b"\xff\xfe\x00\x00"):
        raise _Rejected(E_ENCODING, "only UTF-8 documents are accepted")

    parser = expat.ParserCreate(namespace_separator=" ")
    parser.buffer_text = True

    root: list[XmlNode] = []
    stack: list[tuple] = []  # (qname tuple, attrs tuple, content list)

    def split_name(name: str) -> tuple:
        if " " in name:
            ns, local = name.split(" ", 1)
            return (ns, local)
        return (None, name)

    def on_decl(version, encoding, standalone):
        if encoding is not None and encoding.lower() not in ("utf-8",):
            raise _Rejected(E_ENCODING, f"declared encoding {encoding!r}; only UTF-8 is accepted")

    def on_doctype(*args):
        raise _Rejected(E_DTD, "DTDs and entity declarations are not accepted")

    def on_entity(*args):
        raise _Rejected(E_DTD, "entity declarations are not accepted")

    def on_start(name, attrs):
        qname = split_name(name)
        pairs = tuple((split_name(k), v) for k, v in attrs.items())
        stack.append((qname, pairs, []))

    def on_end(name):
        qname, pairs, content = stack.pop()
        node = XmlNode(qname, sort_attrs(pairs), tuple(content))
        if stack:
            stack[-1][2].append(node)
        else:
            root.append(node)

    def on_text(text):
        if stack:
            content = stack[-1][2]
            if content and isinstance(content[-1], str):
                content[-1] += text
            else:
                content.append(text)

    def on_comment(text):
        if stack:
            stack[-1][2].append(XmlComment(text))

    def on_pi(target, data_):
        if stack:
            stack[-1][2].append(XmlPI(target, data_ or ""))

    parser.XmlDeclHandler = on_decl
    parser.StartDoctypeDeclHandler = on_doctype
    parser.EntityDeclHandler = on_entity
    parser.StartElementHandler = on_start
    parser.EndElementHandler = on_end
    parser.CharacterDataHandler = on_text
    parser.CommentHandler = on_comment
    parser.ProcessingInstructionHandler = on_pi

    try:
        parser.Parse(bytes(data), True)
    except _Rejected:
        raise
    except expat.ExpatError as exc:
        raise _Rejected(E_XML, f"not well-formed XML: {exc}") from None
    except Exception as exc:  # expat surfacing odd input; stay total
        raise _Rejected(E_XML, f"unparseable input: {exc}") from None
    if not root:
        raise _Rejected(E_XML, "no document element")
    return root[0]


def _contains_removed_elements(node: XmlNode) -> Optional[str]:
    if node.tag in ((DIDL_NS, "Reference"), (DIDL_NS, "Declarations")):
        return node.tag[1]
    for child in node.content:
        if isinstance(child, XmlNode):
            found = _contains_removed_elements(child)
            if found:
                return found
    return None


# ---------------------------------------------------------------------------
# Binding the raw tree to the model


class _Binder:
    """Raw tree -> model tree. Strict mode refuses structurally invalid
    documents; lenient (audit) mode repairs where possible and keeps going so
    the validator can report rule findings."""

    def __init__(self, ext_ns: str, lenient: bool):
        self.ext_ns = ext_ns
        self.lenient = lenient
        self.diagnostics: list[ParseDiagnostic] = []
        self.fatal = False

    def diag(self, code: str, path: str, message: str) -> None:
        if code.startswith("W-"):
            severity = WARNING
        elif not self.lenient and code in _STRICT_FATAL:
            severity = FATAL
        elif self.lenient and code in _ALWAYS_FATAL:
            severity = FATAL
        else:
            severity = ERROR
        if severity == FATAL:
            self.fatal = True
        self.diagnostics.append(ParseDiagnostic(code, severity, path, message))

    def bind_document(self, root: XmlNode) -> Optional[model.DidlDocument]:
        if root.tag != (DIDL_NS, "DIDL"):
            ns, local = root.tag
            self.diag(E_ROOT, "/", f"root element is {{{ns or ''}}}{local}, expected DIDL")
            return None
        removed = _contains_removed_elements(root)
        if removed:
            self.diag(E_REFERENCE_REMOVED, "/",
                      f"first-edition element {removed} was removed from the format")
            return None

        document_id = None
        document_created = None
        foreign_attrs = []
        for (ns, local), value in root.attributes:
            if ns is None and local == "DIDLDocumentId":
                document_id = value
            elif ns == self.ext_ns and local == "DIDLDocumentCreated":
                document_created = value
            else:
                foreign_attrs.append(((ns, local), value))

        didl_info: list = []
        entities: list = []
        for raw in root.content:
            if isinstance(raw, str):
                if raw.strip():
                    self.diag(E_STRUCTURE, "/", "character data not allowed at document level")
                continue
            if isinstance(raw, (XmlComment, XmlPI)):
                continue
            if raw.tag == (DIDL_NS, "DIDLInfo"):
                didl_info.extend(self._bind_didl_info(raw))
            elif raw.tag == (DIDL_NS, "Container"):
                bound = self.bind_container(raw, f"/{len(entities)}")
                if bound is not None:
                    entities.append(bound)
            elif raw.tag == (DIDL_NS, "Item"):
                bound = self.bind_item(raw, f"/{len(entities)}")
                if bound is not None:
                    entities.append(bound)
            elif raw.tag[0] == DIDL_NS:
                self.diag(E_STRUCTURE, "/", f"{raw.tag[1]} not allowed at document level")
            else:
                self.diag(E_STRUCTURE, "/",
                          f"foreign element {raw.tag[1]} not allowed at document level")

        if not entities:
            self.diag(E_EMPTY_ROOT, "/", "document declares no container or item")
            return None
        if self.fatal:
            return None

        doc = model.DidlDocument(
            root_entities=tuple(entities),
            document_id=document_id,
            document_created=document_created,
            didl_info=tuple(didl_info),
            foreign_attributes=tuple(foreign_attrs),
        )
        self._check_duplicate_ids(doc)
        if self.fatal:
            return None
        return doc

    def _check_duplicate_ids(self, doc: model.DidlDocument) -> None:
        if self.lenient:
            return  # representable; the validator reports R6
        seen: dict[str, str] = {}
        for path, xml_id in model.collect_xml_ids(doc):
            if xml_id in seen:
                self.diag(E_DUPLICATE_ID, path,
                          f"XML ID {xml_id!r} already used at {seen[xml_id]}")
            else:
                seen[xml_id] = path

    def _bind_didl_info(self, raw: XmlNode) -> list:
        out = []
        for child in raw.content:
            if isinstance(child, str):
                if child.strip():
                    self.diag(W_DIDLINFO_TEXT, "/",
                              "character data inside the document-info block was dropped")
                continue
            out.append(child)
        return out

    # -- shared helpers ----------------------------------------------------

    def _split_attrs(self, raw: XmlNode, known: tuple) -> tuple:
        """(known bare attrs dict, foreign attr pairs)."""
        plain: dict[str, str] = {}
        foreign = []
        for (ns, local), value in raw.attributes:
            if ns is None and local in known:
                plain[local] = value
            else:
                foreign.append(((ns, local), value))
        return plain, foreign

    def _partition(self, raw: XmlNode, path: str, owner: str, slots: dict) -> dict:
        """Distribute raw element children into named buckets.

        `slots` maps local names in the format namespace to bucket names;
        anything else is a containment/structure error (recorded and
        skipped). Whitespace-only text is insignificant here.
        """
        buckets: dict[str, list] = {name: [] for name in set(slots.values())}
        position = 0
        for child in raw.content:
            if isinstance(child, str):
                if child.strip():
                    self.diag(E_STRUCTURE, path, f"character data not allowed inside {owner}")
                continue
            if isinstance(child, (XmlComment, XmlPI)):
                continue
            position += 1
            where = f"{path}/{position - 1}"
            if child.tag[0] == DIDL_NS and child.tag[1] in slots:
                buckets[slots[child.tag[1]]].append(child)
            elif child.tag[0] == DIDL_NS:
                self.diag(E_CONTAINMENT, where,
                          f"{child.tag[1].lower()} not allowed inside {owner}")
            else:
                self.diag(E_STRUCTURE, where,
                          f"foreign element {child.tag[1]} not allowed inside {owner}")
        return buckets

    # -- entity binders ----------------------------------------------------

    def bind_container(self, raw: XmlNode, path: str) -> Optional[model.Container]:
        plain, foreign = self._split_attrs(raw, ("id",))
        buckets = self._partition(raw, path, "container", {
            "Descriptor": "descriptors", "Item": "children", "Container": "children",
        })
        descriptors, index = self._bind_descriptor_list(buckets["descriptors"], path, 0)
        children = []
        for child in buckets["children"]:
            bound = (self.bind_item if child.tag[1] == "Item" else self.bind_container)(
                child, f"{path}/{index + len(children)}")
            if bound is not None:
                children.append(bound)
        if not children:
            self.diag(E_EMPTY_CONTAINER, path, "container binds no item or container")
            return None
        return model.Container(children=tuple(children), xml_id=plain.get("id"),
                               descriptors=descriptors, foreign_attributes=foreign)

    def bind_item(self, raw: XmlNode, path: str) -> Optional[model.Item]:
        plain, foreign = self._split_attrs(raw, ("id",))
        buckets = self._partition(raw, path, "item", {
            "Descriptor": "descriptors", "Choice": "choices", "Condition": "choices",
            "Item": "children", "Component": "children", "Annotation": "annotations",
        })
        descriptors, index = self._bind_descriptor_list(buckets["descriptors"], path, 0)
        choices = tuple(buckets["choices"])  # opaque, round-tripped verbatim
        index += len(choices)
        children = []
        for child in buckets["children"]:
            bound = (self.bind_item if child.tag[1] == "Item" else self.bind_component)(
                child, f"{path}/{index + len(children)}")
            if bound is not None:
                children.append(bound)
        index += len(children)
        annotations = []
        for child in buckets["annotations"]:
            bound = self.bind_annotation(child, f"{path}/{index + len(annotations)}")
            if bound is not None:
                annotations.append(bound)
        return model.Item(xml_id=plain.get("id"), descriptors=descriptors,
                          choice_groups=choices, children=tuple(children),
                          annotations=tuple(annotations), foreign_attributes=foreign)

    def bind_component(self, raw: XmlNode, path: str) -> Optional[model.Component]:
        plain, foreign = self._split_attrs(raw, ("id",))
        buckets = self._partition(raw, path, "component", {
            "Descriptor": "descriptors", "Resource": "resources", "Anchor": "anchors",
        })
        descriptors, index = self._bind_descriptor_list(buckets["descriptors"], path, 0)
        resources = []
        for child in buckets["resources"]:
            resources.append(self.bind_payload(child, f"{path}/{index + len(resources)}",
                                               model.Resource))
        index += len(resources)
        anchors = []
        for child in buckets["anchors"]:
            bound = self.bind_anchor(child, f"{path}/{index + len(anchors)}")
            if bound is not None:
                anchors.append(bound)
        if not resources:
            self.diag(E_EMPTY_COMPONENT, path, "component binds no resource")
            return None
        mimes = {r.mime_type for r in resources}
        if len(mimes) > 1:
            self.diag(E_MIXED_MIME, path,
                      f"resources in one component must share a MIME type, got {sorted(mimes)}")
            if not self.lenient:
                return None
        return model.Component(resources=tuple(resources), xml_id=plain.get("id"),
                               descriptors=descriptors, anchors=tuple(anchors),
                               foreign_attributes=foreign)

    def _bind_descriptor_list(self, raws: list, path: str, start: int) -> tuple:
        out = []
        for raw in raws:
            bound = self.bind_descriptor(raw, f"{path}/{start + len(out)}")
            if bound is not None:
                out.append(bound)
        return tuple(out), start + len(out)

    def bind_descriptor(self, raw: XmlNode, path: str) -> Optional[model.Descriptor]:
        plain, foreign = self._split_attrs(raw, ("id",))
        buckets = self._partition(raw, path, "descriptor", {
            "Descriptor": "nested", "Statement": "statements",
        })
        nested, index = [], 0
        for child in buckets["nested"]:
            bound = self.bind_descriptor(child, f"{path}/{len(nested)}")
            if bound is not None:
                nested.append(bound)
        index = len(nested)
        statements = []
        for child in buckets["statements"]:
            statements.append(self.bind_payload(child, f"{path}/{index + len(statements)}",
                                                model.Statement))
        if not nested and not statements:
            self.diag(E_EMPTY_DESCRIPTOR, path, "descriptor holds no statement or descriptor")
            return None
        return model.Descriptor(statements=tuple(statements), nested_descriptors=tuple(nested),
                                xml_id=plain.get("id"), foreign_attributes=foreign)

    def bind_payload(self, raw: XmlNode, path: str, cls):
        """Bind a Resource or Statement element, deciding its provision."""
        plain, foreign = self._split_attrs(
            raw, ("mimeType", "ref", "encoding", "contentEncoding"))
        mime = plain.get("mimeType")
        if mime is None:
            self.diag(E_MIMETYPE, path, f"{cls.__name__.lower()} lacks the mandatory mimeType")
            mime = ""
        encoding = plain.get("encoding")
        content_encoding = tuple(plain.get("contentEncoding", "").split())

        text = "".join(c for c in raw.content if isinstance(c, str))
        has_element_content = any(isinstance(c, XmlNode) for c in raw.content)
        # comments/PIs alone neither conflict with a ref nor form a payload
        has_xml_content = has_element_content or any(
            isinstance(c, (XmlComment, XmlPI)) for c in raw.content)
        ref = plain.get("ref")

        if ref is not None:
            if has_element_content or text.strip():
                self.diag(E_PROVISION, path,
                          "element supplies both a reference and inline content")
            provision: model.Provision = model.ByReference(ref)
        elif has_xml_content:
            provision = model.ByValueXml(tuple(raw.content))
        else:
            if encoding == "base64":
                text = "".join(text.split())
            provision = model.ByValueText(text)
        return cls(mime_type=mime, provision=provision, encoding=encoding,
                   content_encoding=content_encoding, foreign_attributes=foreign)

    def bind_anchor(self, raw: XmlNode, path: str) -> Optional[model.Anchor]:
        plain, foreign = self._split_attrs(raw, ("id",))
        buckets = self._partition(raw, path, "anchor", {
            "Descriptor": "descriptors", "Fragment": "fragments",
        })
        descriptors, index = self._bind_descriptor_list(buckets["descriptors"], path, 0)
        fragments = buckets["fragments"]
        if not fragments:
            self.diag(E_STRUCTURE, path, "anchor lacks a fragment")
            return None
        if len(fragments) > 1:
            self.diag(E_STRUCTURE, path, "anchor holds more than one fragment")
        from didlkit.xmltree import all_text, get_attr
        frag_raw = fragments[0]
        locator = get_attr(frag_raw, None, "fragmentId") or all_text(frag_raw).strip()
        if not locator:
            self.diag(E_STRUCTURE, f"{path}/{index}", "fragment locator is empty")
            return None
        return model.Anchor(fragment=model.Fragment(locator), xml_id=plain.get("id"),
                            descriptors=descriptors, foreign_attributes=foreign)

    def bind_annotation(self, raw: XmlNode, path: str) -> Optional[model.Annotation]:
        plain, foreign = self._split_attrs(raw, ("id", "target"))
        target = plain.get("target")
        if not target:
            self.diag(E_STRUCTURE, path, "annotation lacks a target ID reference")
            return None
        payload: list = []
        for child in raw.content:
            if isinstance(child, str):
                if child.strip():
                    self.diag(E_STRUCTURE, path, "character data not allowed inside annotation")
                continue
            if isinstance(child, (XmlComment, XmlPI)):
                continue
            where = f"{path}/{len(payload)}"
            if child.tag == (DIDL_NS, "Descriptor"):
                bound = self.bind_descriptor(child, where)
                if bound is not None:
                    payload.append(bound)
            elif child.tag == (DIDL_NS, "Anchor"):
                bound = self.bind_anchor(child, where)
                if bound is not None:
                    payload.append(bound)
            else:
                payload.append(child)  # assertions and foreign payloads stay opaque
        return model.Annotation(target=target, payload=tuple(payload),
                                xml_id=plain.get("id"), foreign_attributes=foreign)


def parse_didl(data: bytes, *, ext_ns: str = DEFAULT_EXT_NS) -> ParseResult:
    """Parse DIDL XML bytes into a document.

    Returns the document plus diagnostics; a fatal diagnostic means no
    document. Never raises on malformed input.
    """
    return _parse(data, ext_ns=ext_ns, lenient=False)


def parse_didl_lenient(data: bytes, *, ext_ns: str = DEFAULT_EXT_NS) -> ParseResult:
    """Tolerant parse used by the validator: structural violations become
    error diagnostics and the offending nodes are repaired or dropped, so a
    best-effort document usually survives for rule checking."""
    return _parse(data, ext_ns=ext_ns, lenient=True)


def _parse(data: bytes, *, ext_ns: str, lenient: bool) -> ParseResult:
    try:
        root = _read_xml(data)
    except _Rejected as rej:
        return ParseResult(None, [ParseDiagnostic(rej.code, FATAL, "/", str(rej))])
    binder = _Binder(ext_ns, lenient)
    try:
        doc = binder.bind_document(root)
    except ModelError as exc:  # defensive: binder should pre-check everything
        binder.diag(E_STRUCTURE, "/", str(exc))
        doc = None
    return ParseResult(doc if not binder.fatal else None, binder.diagnostics)


# ---------------------------------------------------------------------------
# Serialization


_BASE64_WRAP = 76
_DIDL_ATTR_ORDER = ("id", "mimeType", "ref", "encoding", "contentEncoding", "target", "fragmentId")


def _escape_text(text: str) -> str:
    text = text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    return text.replace("\r", "&#13;")


def _escape_attr(value: str) -> str:
    value = value.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    value = value.replace('"', "&quot;")
    return value.replace("\t", "&#9;").replace("\n", "&#10;").replace("\r", "&#13;")


class _PrefixTable:
    def __init__(self, ext_ns: str):
        self.ext_ns = ext_ns
        self.by_uri: dict[str, str] = {}
        self.counter = 0

    def assign(self, uri: str) -> str:
        if uri == XML_NS:
            return "xml"
        prefix = self.by_uri.get(uri)
        if prefix is not None:
            return prefix
        taken = set(self.by_uri.values())
        preferred = None
        if uri == self.ext_ns:
            preferred = "diext"
        elif uri in WELL_KNOWN_PREFIXES:
            preferred = WELL_KNOWN_PREFIXES[uri]
        if preferred is None or preferred in taken:
            while True:
                self.counter += 1
                preferred = f"ns{self.counter}"
                if preferred not in taken:
                    break
        self.by_uri[uri] = preferred
        return preferred

    def qname(self, ns: str | None, local: str) -> str:
        if ns is None:
            return local
        return f"{self.assign(ns)}:{local}"

    def declarations(self) -> list:
        return sorted((prefix, uri) for uri, prefix in self.by_uri.items())


class _Writer:
    def __init__(self, ext_ns: str, pretty: bool):
        self.ext_ns = ext_ns
        self.pretty = pretty
        self.prefixes = _PrefixTable(ext_ns)
        self.parts: list[str] = []

    # namespace pre-collection fixes prefix assignment order to the
    # canonical walk, independent of emission details
    def collect_document(self, doc: model.DidlDocument) -> None:
        self.prefixes.assign(DIDL_NS)
        if doc.document_created is not None:
            self.prefixes.assign(self.ext_ns)
        self._collect_attr_pairs(doc.foreign_attributes)
        for entry in doc.didl_info:
            self._collect_content(entry)
        for entity in doc.root_entities:
            self._collect_node(entity)

    def _collect_attr_pairs(self, pairs) -> None:
        for (ns, _), _ in pairs:
            if ns:
                self.prefixes.assign(ns)

    def _collect_content(self, item) -> None:
        if isinstance(item, XmlNode):
            if item.tag[0]:
                self.prefixes.assign(item.tag[0])
            self._collect_attr_pairs(item.attributes)
            for c in item.content:
                self._collect_content(c)

    def _collect_node(self, node) -> None:
        self._collect_attr_pairs(getattr(node, "foreign_attributes", ()))
        if isinstance(node, (model.Statement, model.Resource)):
            if isinstance(node.provision, model.ByValueXml):
                for c in node.provision.content:
                    self._collect_content(c)
            return
        if isinstance(node, model.Item):
            for group in node.choice_groups:
                self._collect_content(group)
        if isinstance(node, model.Annotation):
            for entry in node.payload:
                if isinstance(entry, XmlNode):
                    self._collect_content(entry)
                else:
                    self._collect_node(entry)
            return
        for child in model.child_sequence(node):
            if not isinstance(child, XmlNode):
                self._collect_node(child)

    # -- emission ----------------------------------------------------------

    def write(self, text: str) -> None:
        self.parts.append(text)

    def newline(self, depth: int) -> None:
        if self.pretty:
            self.write("\n" + "  " * depth)

    def attr_string(self, node, extra: dict | None = None) -> str:
        plain: dict[str, str] = dict(extra or {})
        if getattr(node, "xml_id", None) is not None:
            plain["id"] = node.xml_id
        out = []
        for name in _DIDL_ATTR_ORDER:
            if name in plain:
                out.append(f' {name}="{_escape_attr(plain[name])}"')
        foreign = sorted(
            ((self.prefixes.qname(ns, local), value)
             for (ns, local), value in getattr(node, "foreign_attributes", ())),
            key=lambda p: p[0])
        for qname, value in foreign:
            out.append(f' {qname}="{_escape_attr(value)}"')
        return "".join(out)

    def emit_document(self, doc: model.DidlDocument) -> str:
        self.collect_document(doc)
        body = _Writer(self.ext_ns, self.pretty)
        body.prefixes = self.prefixes
        if doc.didl_info:
            body.newline(1)
            body.write(f"<{self.prefixes.qname(DIDL_NS, 'DIDLInfo')}>")
            for entry in doc.didl_info:
                body.newline(2)
                body.emit_foreign(entry)
            body.newline(1)
            body.write(f"</{self.prefixes.qname(DIDL_NS, 'DIDLInfo')}>")
        for entity in doc.root_entities:
            body.newline(1)
            body.emit_node(entity, 1)

        decls = "".join(f' xmlns:{p}="{_escape_attr(u)}"'
                        for p, u in self.prefixes.declarations())
        attrs = ""
        if doc.document_id is not None:
            attrs += f' DIDLDocumentId="{_escape_attr(doc.document_id)}"'
        foreign_pairs = list(doc.foreign_attributes)
        if doc.document_created is not None:
            foreign_pairs.append(((self.ext_ns, "DIDLDocumentCreated"), doc.document_created))
        foreign = sorted(((self.prefixes.qname(ns, local), value)
                          for (ns, local), value in foreign_pairs), key=lambda p: p[0])
        for qname, value in foreign:
            attrs += f' {qname}="{_escape_attr(value)}"'

        didl = self.prefixes.qname(DIDL_NS, "DIDL")
        inner = "".join(body.parts)
        newline = "\n" if self.pretty else ""
        return (f'<?xml version="1.0" encoding="UTF-8"?>\n'
                f"<{didl}{decls}{attrs}>{inner}{newline}</{didl}>\n")

    def emit_node(self, node, depth: int) -> None:
        q = self.prefixes.qname
        if isinstance(node, model.Container):
            self._emit_structural(q(DIDL_NS, "Container"), node,
                                  node.descriptors + node.children, depth)
        elif isinstance(node, model.Item):
            children = (node.descriptors + node.choice_groups
                        + node.children + node.annotations)
            self._emit_structural(q(DIDL_NS, "Item"), node, children, depth)
        elif isinstance(node, model.Component):
            self._emit_structural(q(DIDL_NS, "Component"), node,
                                  node.descriptors + node.resources + node.anchors, depth)
        elif isinstance(node, model.Descriptor):
            self._emit_structural(q(DIDL_NS, "Descriptor"), node,
                                  node.nested_descriptors + node.statements, depth)
        elif isinstance(node, model.Annotation):
            self._emit_structural(q(DIDL_NS, "Annotation"), node, node.payload, depth,
                                  extra={"target": node.target})
        elif isinstance(node, model.Anchor):
            self._emit_structural(q(DIDL_NS, "Anchor"), node,
                                  node.descriptors + (node.fragment,), depth)
        elif isinstance(node, model.Fragment):
            self.write(f'<{q(DIDL_NS, "Fragment")} '
                       f'fragmentId="{_escape_attr(node.fragment_id)}"/>')
        elif isinstance(node, model.Statement):
            self._emit_payload(q(DIDL_NS, "Statement"), node)
        elif isinstance(node, model.Resource):
            self._emit_payload(q(DIDL_NS, "Resource"), node)
        elif isinstance(node, XmlNode):
            self.emit_foreign(node)
        else:
            raise SerializeError(f"cannot serialize {type(node).__name__}")

    def _emit_structural(self, qname: str, node, children: tuple, depth: int,
                         extra: dict | None = None) -> None:
        attrs = self.attr_string(node, extra)
        if not children:
            self.write(f"<{qname}{attrs}/>")
            return
        self.write(f"<{qname}{attrs}>")
        for child in children:
            self.newline(depth + 1)
            self.emit_node(child, depth + 1)
        self.newline(depth)
        self.write(f"</{qname}>")

    def _emit_payload(self, qname: str, node) -> None:
        extra: dict[str, str] = {}
        if node.mime_type:
            extra["mimeType"] = node.mime_type
        if node.encoding is not None:
            extra["encoding"] = node.encoding
        if node.content_encoding:
            extra["contentEncoding"] = " ".join(node.content_encoding)
        provision = node.provision
        if isinstance(provision, model.ByReference):
            extra["ref"] = provision.uri
            self.write(f"<{qname}{self.attr_string(node, extra)}/>")
            return
        self.write(f"<{qname}{self.attr_string(node, extra)}>")
        if isinstance(provision, model.ByValueText):
            text = provision.text
            if node.encoding == "base64":
                text = _rewrap_base64(text)
            self.write(_escape_text(text))
        else:
            for entry in provision.content:
                self.emit_foreign(entry)
        self.write(f"</{qname}>")

    def emit_foreign(self, item) -> None:
        """Foreign subtrees are emitted verbatim: their internal whitespace
        belongs to the payload and is never re-indented."""
        if isinstance(item, str):
            self.write(_escape_text(item))
        elif isinstance(item, XmlComment):
            self.write(f"<!--{item.text}-->")
        elif isinstance(item, XmlPI):
            data = f" {item.data}" if item.data else ""
            self.write(f"<?{item.target}{data}?>")
        elif isinstance(item, XmlNode):
            qname = self.prefixes.qname(*item.tag)
            attrs = "".join(
                f' {q}="{_escape_attr(v)}"'
                for q, v in sorted((self.prefixes.qname(ns, local), value)
                                   for (ns, local), value in item.attributes))
            if not item.content:
                self.write(f"<{qname}{attrs}/>")
                return
            self.write(f"<{qname}{attrs}>")
            for child in item.content:
                self.emit_foreign(child)
            self.write(f"</{qname}>")
        else:
            raise SerializeError(f"cannot serialize {type(item).__name__}")


def _rewrap_base64(text: str) -> str:
    compact = "".join(text.split())
    try:
        base64.b64decode(compact, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise SerializeError(f"refusing to emit invalid base64 payload: {exc}") from None
    return "\n".join(compact[i:i + _BASE64_WRAP] for i in range(0, len(compact), _BASE64_WRAP)) \
        if compact else ""


def _check_emittable(doc: model.DidlDocument) -> None:
    for _, node in model.iter_with_paths(doc):
        if isinstance(node, (model.Statement, model.Resource)):
            if node.encoding == "base64" and isinstance(node.provision, model.ByValueText):
                _rewrap_base64(node.provision.text)


def serialize_didl(doc: model.DidlDocument, *, ext_ns: str = DEFAULT_EXT_NS,
                   pretty: bool = True) -> bytes:
    """Emit the document as UTF-8 XML (indented for humans by default)."""
    _check_emittable(doc)
    return _Writer(ext_ns, pretty).emit_document(doc).encode("utf-8")


def canonical_bytes(doc: model.DidlDocument, *, ext_ns: str = DEFAULT_EXT_NS) -> bytes:
    """Deterministic serialization: equal trees yield equal bytes."""
    return serialize_didl(doc, ext_ns=ext_ns, pretty=False)


def serialize_fragment(node, *, ext_ns: str = DEFAULT_EXT_NS) -> bytes:
    """A standalone subtree (no XML declaration) with its own namespace
    declarations, for fragment dissemination and payload embedding."""
    writer = _Writer(ext_ns, pretty=False)
    if isinstance(node, XmlNode):
        writer._collect_content(node)
    else:
        writer.prefixes.assign(DIDL_NS)
        writer._collect_node(node)
    inner = _Writer(ext_ns, pretty=False)
    inner.prefixes = writer.prefixes
    inner.emit_node(node, 0)
    text = "".join(inner.parts)
    decls = "".join(f' xmlns:{p}="{_escape_attr(u)}"' for p, u in writer.prefixes.declarations())
    if decls:
        # splice declarations into the root start tag
        end = text.index(">")
        if text[end - 1] == "/":
            text = text[:end - 1] + decls + "/" + text[end:]
        else:
            text = text[:end] + decls + text[end:]
    return text.encode("utf-8")


def canonical_xml_payload(content: tuple, *, ext_ns: str = DEFAULT_EXT_NS) -> bytes:
    """Canonical bytes of an inline XML payload.

    Whitespace-only text between elements is dropped so that equivalence
    checks do not depend on how the carrier document was indented.
    """
    from didlkit.xmltree import drop_insignificant_text
    pieces = drop_insignificant_text(tuple(content))
    out = []
    for piece in pieces:
        if isinstance(piece, XmlNode):
            out.append(serialize_fragment(piece, ext_ns=ext_ns))
        elif isinstance(piece, str):
            out.append(_escape_text(piece).encode("utf-8"))
        elif isinstance(piece, XmlComment):
            out.append(f"<!--{piece.text}-->".encode("utf-8"))
        elif isinstance(piece, XmlPI):
            data = f" {piece.data}" if piece.data else ""
            out.append(f"<?{piece.target}{data}?>".encode("utf-8"))
    return b"".join(out)
