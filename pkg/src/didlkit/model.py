"""In-memory tree of declared digital objects.

The tree mirrors the entity model of the DIDL format: containers group
items, items bind components (and sub-items), components group equivalent
resources, and descriptor/statement constructs hang secondary information
off any of them. Values are frozen dataclasses; every operation over a
document is a pure read, and "modified" documents are new values built with
:func:`replace_node`.

Structural shape (child kinds, required non-emptiness) is enforced at
construction and raises :class:`~didlkit.errors.ModelError`. Scalar content
(MIME types, URIs, base64 payloads, ID uniqueness across the tree, equal
MIME types within one component) is deliberately representable in invalid
states so that the validator can report findings on parsed documents; the
strict parser refuses to return documents violating any of it.

Node paths address tree positions as ``/``-joined child indices from the
document root (``/0/2/1``). The index space of a node is the flat canonical
child sequence returned by :func:`child_sequence`.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Iterator, Optional, Union

from didlkit.errors import ModelError, PathError
from didlkit.namespaces import DII_NS
from didlkit.xmltree import XmlComment, XmlNode, XmlPI, sort_attrs


@dataclass(frozen=True)
class ByReference:
    """Payload pointed at via an (absolute) URI."""

    uri: str


@dataclass(frozen=True)
class ByValueText:
    """Inline character data: raw text, or base64 when flagged on the host."""

    text: str = ""


@dataclass(frozen=True)
class ByValueXml:
    """Inline XML (possibly mixed) content, carried opaquely."""

    content: tuple = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "content", tuple(self.content))
        if not self.content:
            raise ModelError("inline XML provision requires content")


Provision = Union[ByReference, ByValueText, ByValueXml]


def _norm_foreign(pairs) -> tuple:
    return sort_attrs(pairs or ())


@dataclass(frozen=True)
class Statement:
    """Secondary-information payload; never an addressable asset itself."""

    mime_type: str
    provision: Provision
    encoding: Optional[str] = None
    content_encoding: tuple = ()
    foreign_attributes: tuple = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "content_encoding", tuple(self.content_encoding))
        object.__setattr__(self, "foreign_attributes", _norm_foreign(self.foreign_attributes))


@dataclass(frozen=True)
class Resource:
    """An individually identifiable datastream (or non-digital referent)."""

    mime_type: str
    provision: Provision
    encoding: Optional[str] = None
    content_encoding: tuple = ()
    foreign_attributes: tuple = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "content_encoding", tuple(self.content_encoding))
        object.__setattr__(self, "foreign_attributes", _norm_foreign(self.foreign_attributes))


@dataclass(frozen=True)
class Descriptor:
    """Binds statements (and nested descriptors) to the enclosing entity."""

    statements: tuple = ()
    nested_descriptors: tuple = ()
    xml_id: Optional[str] = None
    foreign_attributes: tuple = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "statements", tuple(self.statements))
        object.__setattr__(self, "nested_descriptors", tuple(self.nested_descriptors))
        object.__setattr__(self, "foreign_attributes", _norm_foreign(self.foreign_attributes))
        if not self.statements and not self.nested_descriptors:
            raise ModelError("descriptor must hold a statement or a nested descriptor")
        _expect_kinds("descriptor", self.statements, (Statement,))
        _expect_kinds("descriptor", self.nested_descriptors, (Descriptor,))


@dataclass(frozen=True)
class Fragment:
    """A resource-type-specific locator for a point or range in a resource."""

    fragment_id: str

    def __post_init__(self) -> None:
        if not self.fragment_id:
            raise ModelError("fragment locator must be non-empty")


@dataclass(frozen=True)
class Anchor:
    """Binds descriptors to a fragment of the enclosing component's resources."""

    fragment: Fragment
    xml_id: Optional[str] = None
    descriptors: tuple = ()
    foreign_attributes: tuple = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "descriptors", tuple(self.descriptors))
        object.__setattr__(self, "foreign_attributes", _norm_foreign(self.foreign_attributes))
        if not isinstance(self.fragment, Fragment):
            raise ModelError("anchor requires a fragment")
        _expect_kinds("anchor", self.descriptors, (Descriptor,))


@dataclass(frozen=True)
class Component:
    """Groups bit-equivalent resources plus descriptors about them."""

    resources: tuple
    xml_id: Optional[str] = None
    descriptors: tuple = ()
    anchors: tuple = ()
    foreign_attributes: tuple = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "resources", tuple(self.resources))
        object.__setattr__(self, "descriptors", tuple(self.descriptors))
        object.__setattr__(self, "anchors", tuple(self.anchors))
        object.__setattr__(self, "foreign_attributes", _norm_foreign(self.foreign_attributes))
        if not self.resources:
            raise ModelError("component must bind at least one resource")
        _expect_kinds("component", self.resources, (Resource,))
        _expect_kinds("component", self.descriptors, (Descriptor,))
        _expect_kinds("component", self.anchors, (Anchor,))


@dataclass(frozen=True)
class Annotation:
    """Adds information to an identified entity without altering it."""

    target: str
    payload: tuple = ()
    xml_id: Optional[str] = None
    foreign_attributes: tuple = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "payload", tuple(self.payload))
        object.__setattr__(self, "foreign_attributes", _norm_foreign(self.foreign_attributes))
        if not self.target:
            raise ModelError("annotation requires a target ID reference")
        _expect_kinds("annotation", self.payload, (Descriptor, Anchor, XmlNode))


@dataclass(frozen=True)
class Item:
    """A declared digital object: sub-items and/or components plus descriptors."""

    xml_id: Optional[str] = None
    descriptors: tuple = ()
    choice_groups: tuple = ()
    children: tuple = ()
    annotations: tuple = ()
    foreign_attributes: tuple = ()

    def __post_init__(self) -> None:
        for name in ("descriptors", "choice_groups", "children", "annotations"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "foreign_attributes", _norm_foreign(self.foreign_attributes))
        _expect_kinds("item", self.descriptors, (Descriptor,))
        _expect_kinds("item", self.choice_groups, (XmlNode,))
        _expect_kinds("item", self.children, (Item, Component))
        _expect_kinds("item", self.annotations, (Annotation,))


@dataclass(frozen=True)
class Container:
    """Groups items (or further containers); not itself a digital object."""

    children: tuple
    xml_id: Optional[str] = None
    descriptors: tuple = ()
    foreign_attributes: tuple = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "children", tuple(self.children))
        object.__setattr__(self, "descriptors", tuple(self.descriptors))
        object.__setattr__(self, "foreign_attributes", _norm_foreign(self.foreign_attributes))
        if not self.children:
            raise ModelError("container must bind at least one item or container")
        _expect_kinds("container", self.children, (Item, Container))
        _expect_kinds("container", self.descriptors, (Descriptor,))


@dataclass(frozen=True)
class DidlDocument:
    """One parsed or constructed document: metadata plus the entity tree."""

    root_entities: tuple
    document_id: Optional[str] = None
    document_created: Optional[str] = None
    didl_info: tuple = ()
    foreign_attributes: tuple = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "root_entities", tuple(self.root_entities))
        object.__setattr__(self, "didl_info", tuple(self.didl_info))
        object.__setattr__(self, "foreign_attributes", _norm_foreign(self.foreign_attributes))
        if not self.root_entities:
            raise ModelError("document must declare at least one container or item")
        _expect_kinds("document", self.root_entities, (Container, Item))
        _expect_kinds("document info", self.didl_info, (XmlNode, XmlComment, XmlPI))


Node = Union[Container, Item, Component, Descriptor, Statement, Resource,
             Anchor, Fragment, Annotation, XmlNode]

_KIND_NAMES = {
    Container: "container",
    Item: "item",
    Component: "component",
    Descriptor: "descriptor",
    Statement: "statement",
    Resource: "resource",
    Anchor: "anchor",
    Fragment: "fragment",
    Annotation: "annotation",
    XmlNode: "choice",
}


def _expect_kinds(owner: str, seq, kinds) -> None:
    for entry in seq:
        if not isinstance(entry, kinds):
            names = "/".join(_KIND_NAMES.get(k, k.__name__) for k in kinds)
            raise ModelError(f"{owner} may only hold {names}, got {type(entry).__name__}")


def entity_kind(node: Node) -> str:
    """Name of the entity a node represents ('item', 'component', ...).

    Opaque conditional subtrees answer 'choice'.
    """
    try:
        return _KIND_NAMES[type(node)]
    except KeyError:
        raise ModelError(f"not a model node: {type(node).__name__}") from None


def child_sequence(node: Node) -> tuple:
    """Flat canonical child list of a node; defines the path index space."""
    if isinstance(node, Container):
        return node.descriptors + node.children
    if isinstance(node, Item):
        return node.descriptors + node.choice_groups + node.children + node.annotations
    if isinstance(node, Component):
        return node.descriptors + node.resources + node.anchors
    if isinstance(node, Descriptor):
        return node.nested_descriptors + node.statements
    if isinstance(node, Anchor):
        return node.descriptors + (node.fragment,)
    if isinstance(node, Annotation):
        return node.payload
    return ()


def iter_with_paths(doc: DidlDocument) -> Iterator[tuple]:
    """Yield (path, node) pairs for the whole tree in document order."""
    for i, entity in enumerate(doc.root_entities):
        yield from _walk(f"/{i}", entity)


def _walk(path: str, node: Node) -> Iterator[tuple]:
    yield path, node
    for i, child in enumerate(child_sequence(node)):
        yield from _walk(f"{path}/{i}", child)


def path_key(path: str) -> tuple:
    """Sort key placing paths in document order; '/' is the document itself."""
    if path in ("", "/"):
        return ()
    try:
        return tuple(int(seg) for seg in path.strip("/").split("/"))
    except ValueError:
        return (1 << 30,)


def find_by_id(doc: DidlDocument, xml_id: str) -> Optional[Node]:
    """The unique node bearing xml_id, or None. IDs inside opaque subtrees
    are not searched."""
    for _, node in iter_with_paths(doc):
        if getattr(node, "xml_id", None) == xml_id:
            return node
    return None


def collect_xml_ids(doc: DidlDocument) -> list:
    """(path, xml_id) for every identified node, in document order."""
    out = []
    for path, node in iter_with_paths(doc):
        xml_id = getattr(node, "xml_id", None)
        if xml_id is not None:
            out.append((path, xml_id))
    return out


def get_node(doc: DidlDocument, path: str) -> Node:
    """Resolve a node path; raises PathError if it does not exist."""
    segs = _segments(path)
    if not segs:
        raise PathError(f"path does not address a node: {path!r}")
    try:
        node = doc.root_entities[segs[0]]
        for idx in segs[1:]:
            node = child_sequence(node)[idx]
    except IndexError:
        raise PathError(f"no node at path {path}") from None
    return node


def replace_node(doc: DidlDocument, path: str, new_node: Node) -> DidlDocument:
    """A new document with the node at `path` swapped for `new_node`."""
    segs = _segments(path)
    if not segs:
        raise PathError(f"path does not address a node: {path!r}")
    if segs[0] >= len(doc.root_entities):
        raise PathError(f"no node at path {path}")
    entities = list(doc.root_entities)
    entities[segs[0]] = _replace_in(entities[segs[0]], segs[1:], new_node)
    return dataclasses.replace(doc, root_entities=tuple(entities))


def _segments(path: str) -> list:
    if path in ("", "/"):
        return []
    try:
        return [int(seg) for seg in path.strip("/").split("/")]
    except ValueError:
        raise PathError(f"malformed node path: {path!r}") from None


def _replace_in(node: Node, segs: list, new_node: Node) -> Node:
    if not segs:
        return new_node
    idx = segs[0]
    seq = child_sequence(node)
    if idx >= len(seq):
        raise PathError("no node at path")
    return _with_child(node, idx, _replace_in(seq[idx], segs[1:], new_node))


def _with_child(node: Node, idx: int, child: Node) -> Node:
    """Rebuild a node with the flat child at `idx` replaced."""
    if isinstance(node, Container):
        sections = [("descriptors", node.descriptors), ("children", node.children)]
    elif isinstance(node, Item):
        sections = [("descriptors", node.descriptors), ("choice_groups", node.choice_groups),
                    ("children", node.children), ("annotations", node.annotations)]
    elif isinstance(node, Component):
        sections = [("descriptors", node.descriptors), ("resources", node.resources),
                    ("anchors", node.anchors)]
    elif isinstance(node, Descriptor):
        sections = [("nested_descriptors", node.nested_descriptors),
                    ("statements", node.statements)]
    elif isinstance(node, Anchor):
        sections = [("descriptors", node.descriptors), ("fragment", (node.fragment,))]
    elif isinstance(node, Annotation):
        sections = [("payload", node.payload)]
    else:
        raise PathError(f"{entity_kind(node)} has no children")
    for name, seq in sections:
        if idx < len(seq):
            if name == "fragment":
                return dataclasses.replace(node, fragment=child)
            updated = seq[:idx] + (child,) + seq[idx + 1:]
            return dataclasses.replace(node, **{name: updated})
        idx -= len(seq)
    raise PathError("no node at path")


def statement_xml_root(stmt: Statement) -> Optional[XmlNode]:
    """The single element of an inline-XML statement, if that is its shape."""
    if not isinstance(stmt.provision, ByValueXml):
        return None
    elements = [c for c in stmt.provision.content if isinstance(c, XmlNode)]
    stray_text = any(isinstance(c, str) and c.strip() for c in stmt.provision.content)
    if len(elements) == 1 and not stray_text:
        return elements[0]
    return None


@dataclass(frozen=True)
class RelationshipTriple:
    subject: str
    predicate: str
    object: str


DERIVED_PREDICATES = ("hasResource", "isPartOfItem", "hasIdentifier")


def derive_relationships(doc: DidlDocument) -> tuple:
    """Structural relationships read off the tree, in document order.

    Emitted per node visit: child-item membership first, then one triple per
    identifier descriptor, then (for components) one per bound resource.
    Subjects use the node's XML ID when present, its path otherwise; resource
    objects are always paths since resources carry no IDs.
    """
    triples: list[RelationshipTriple] = []

    def ref(path: str, node: Node) -> str:
        return getattr(node, "xml_id", None) or path

    def visit(path: str, node: Node, parent_path: str | None, parent: Node | None) -> None:
        subject = ref(path, node)
        if isinstance(node, Item) and isinstance(parent, Item):
            triples.append(RelationshipTriple(subject, "isPartOfItem", ref(parent_path, parent)))
        if isinstance(node, (Container, Item, Component, Anchor)):
            for descriptor in node.descriptors:
                for stmt in descriptor.statements:
                    root = statement_xml_root(stmt)
                    if root is not None and root.tag == (DII_NS, "Identifier"):
                        from didlkit.xmltree import all_text
                        triples.append(RelationshipTriple(
                            subject, "hasIdentifier", all_text(root).strip()))
        if isinstance(node, Component):
            offset = len(node.descriptors)
            for i in range(len(node.resources)):
                triples.append(RelationshipTriple(subject, "hasResource", f"{path}/{offset + i}"))
        for i, child in enumerate(child_sequence(node)):
            visit(f"{path}/{i}", child, path, node)

    for i, entity in enumerate(doc.root_entities):
        visit(f"/{i}", entity, None, None)
    return tuple(triples)


def verify_invariants(doc: DidlDocument) -> None:
    """Raise ModelError on any cross-node invariant violation.

    Construction already guarantees local shape; this adds the two checks
    that span nodes: XML ID uniqueness and per-component MIME homogeneity.
    The strict parser enforces both before returning a document.
    """
    seen: dict[str, str] = {}
    for path, node in iter_with_paths(doc):
        xml_id = getattr(node, "xml_id", None)
        if xml_id is not None:
            if xml_id in seen:
                raise ModelError(f"duplicate XML ID {xml_id!r} at {path} and {seen[xml_id]}")
            seen[xml_id] = path
        if isinstance(node, Component):
            mimes = {r.mime_type for r in node.resources}
            if len(mimes) > 1:
                raise ModelError(f"component at {path} mixes MIME types {sorted(mimes)}")
