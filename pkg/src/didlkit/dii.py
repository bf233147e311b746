"""Identifier constructs: read and attach identification descriptors.

Identifiers ride in descriptor/statement constructs whose inline XML is a
single element from the DII namespace. Only containers, items, components,
and anchors may host them; statements are not addressable assets and never
carry identifiers of their own.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

from didlkit import model
from didlkit.errors import BadTargetError, InvalidUriError, MalformedIdentifierError
from didlkit.namespaces import DII_NS
from didlkit.validator import is_absolute_uri
from didlkit.xmltree import all_text, element, get_attr

IDENTIFIER_HOST_KINDS = ("container", "item", "component", "anchor")
IDENTIFIER_MIME = "text/xml; charset=UTF-8"


@dataclass(frozen=True)
class DiiIdentifier:
    value: str
    host_entity: str  # node path


@dataclass(frozen=True)
class RelatedIdentifier:
    value: str
    relationship_type: Optional[str]
    host_entity: str


def _identifier_statements(doc: model.DidlDocument, local: str) -> Iterator[tuple]:
    """(host path, host node, statement element) for each DII statement of
    the given element name hosted on an identifiable entity."""
    for path, node in model.iter_with_paths(doc):
        if model.entity_kind(node) not in IDENTIFIER_HOST_KINDS:
            continue
        for descriptor in node.descriptors:
            for stmt in descriptor.statements:
                root = model.statement_xml_root(stmt)
                if root is not None and root.tag == (DII_NS, local):
                    yield path, node, root


def extract_identifiers(doc: model.DidlDocument) -> list:
    """All identifier statements, (value, host path), in document order."""
    out = []
    for path, _, root in _identifier_statements(doc, "Identifier"):
        value = all_text(root).strip()
        if not is_absolute_uri(value):
            raise MalformedIdentifierError(
                f"identifier statement on {path} holds no absolute URI: {value!r}")
        out.append(DiiIdentifier(value=value, host_entity=path))
    return out


def extract_related(doc: model.DidlDocument) -> list:
    """All related-identifier statements with their relationship typing."""
    out = []
    for path, _, root in _identifier_statements(doc, "RelatedIdentifier"):
        value = all_text(root).strip()
        if not is_absolute_uri(value):
            raise MalformedIdentifierError(
                f"related-identifier statement on {path} holds no absolute URI: {value!r}")
        out.append(RelatedIdentifier(value=value,
                                     relationship_type=get_attr(root, None, "relationshipType"),
                                     host_entity=path))
    return out


def identifier_descriptor(uri: str, *, related: bool = False,
                          relationship_type: Optional[str] = None) -> model.Descriptor:
    """A descriptor/statement construct carrying one identifier."""
    local = "RelatedIdentifier" if related else "Identifier"
    attrs = {}
    if relationship_type is not None:
        attrs[(None, "relationshipType")] = relationship_type
    stmt = model.Statement(
        mime_type=IDENTIFIER_MIME,
        provision=model.ByValueXml((element(DII_NS, local, attrs, (uri,)),)),
    )
    return model.Descriptor(statements=(stmt,))


def attach_identifier(doc: model.DidlDocument, node_path: str, uri: str) -> model.DidlDocument:
    """A new document with an identifier descriptor prepended to the node.

    Prepending keeps the identifier the first descriptor, matching the
    convention of stored packages.
    """
    if not is_absolute_uri(uri):
        raise InvalidUriError(f"identifier must be an absolute URI: {uri!r}")
    node = model.get_node(doc, node_path)
    kind = model.entity_kind(node)
    if kind not in IDENTIFIER_HOST_KINDS:
        raise BadTargetError(
            f"cannot attach an identifier to a {kind}; allowed: {', '.join(IDENTIFIER_HOST_KINDS)}")
    import dataclasses
    updated = dataclasses.replace(
        node, descriptors=(identifier_descriptor(uri),) + node.descriptors)
    return model.replace_node(doc, node_path, updated)
