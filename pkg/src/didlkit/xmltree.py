"""Immutable values representing foreign (non-DIDL) XML content.

Element and attribute names are (namespace-uri, local-name) pairs; prefix
spellings are never stored, so structural equality of two trees is equality
"modulo prefix spelling and attribute order" by construction. Mixed content
is a flat tuple whose entries are text segments, elements, comments, or
processing instructions in document order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Optional, Tuple, Union

QName = Tuple[Optional[str], str]


@dataclass(frozen=True)
class XmlComment:
    text: str


@dataclass(frozen=True)
class XmlPI:
    target: str
    data: str = ""


@dataclass(frozen=True)
class XmlNode:
    tag: QName
    attributes: tuple = ()
    content: tuple = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "attributes", sort_attrs(self.attributes))
        object.__setattr__(self, "content", tuple(self.content))

    @property
    def ns(self) -> str | None:
        return self.tag[0]

    @property
    def local(self) -> str:
        return self.tag[1]


XmlContent = Union[str, XmlNode, XmlComment, XmlPI]


def sort_attrs(pairs: Iterable[tuple]) -> tuple:
    """Normalize attribute pairs to a tuple sorted by (namespace, local)."""
    if isinstance(pairs, Mapping):
        pairs = pairs.items()
    return tuple(sorted(((tuple(q), v) for q, v in pairs), key=lambda p: (p[0][0] or "", p[0][1])))


def element(ns: str | None, local: str, attrs: Mapping | Iterable | None = None,
            content: Iterable[XmlContent] = ()) -> XmlNode:
    """Convenience constructor for an element node."""
    return XmlNode((ns, local), sort_attrs(attrs or ()), tuple(content))


def get_attr(node: XmlNode, ns: str | None, local: str, default: str | None = None) -> str | None:
    for (ans, alocal), value in node.attributes:
        if ans == ns and alocal == local:
            return value
    return default


def child_elements(node: XmlNode) -> tuple[XmlNode, ...]:
    return tuple(c for c in node.content if isinstance(c, XmlNode))


def all_text(node: XmlNode) -> str:
    """Concatenated character data of the node and its descendants."""
    parts: list[str] = []
    for c in node.content:
        if isinstance(c, str):
            parts.append(c)
        elif isinstance(c, XmlNode):
            parts.append(all_text(c))
    return "".join(parts)


def iter_namespaces(item: XmlContent) -> Iterator[str]:
    """All namespace URIs used by element tags and attributes, pre-order."""
    if isinstance(item, XmlNode):
        if item.tag[0]:
            yield item.tag[0]
        for (ans, _), _ in item.attributes:
            if ans:
                yield ans
        for c in item.content:
            yield from iter_namespaces(c)


def drop_insignificant_text(content: Iterable[XmlContent]) -> tuple:
    """Remove whitespace-only text segments when element children exist.

    Used to canonicalize XML payloads whose carrier document may have been
    pretty-printed; text-only content is returned untouched.
    """
    items = tuple(content)
    if not any(isinstance(c, XmlNode) for c in items):
        return items
    out = []
    for c in items:
        if isinstance(c, str) and not c.strip():
            continue
        if isinstance(c, XmlNode):
            c = XmlNode(c.tag, c.attributes, drop_insignificant_text(c.content))
        out.append(c)
    return tuple(out)
