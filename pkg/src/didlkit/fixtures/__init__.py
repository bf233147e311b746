"""Golden corpus: transcribed sample documents plus generated mutants.

Document fixtures live as files under ``data/``; each mutant is derived
deterministically from the ``table9`` document by one named operator, so the
corpus is closed under the operators listed in :data:`MUTATION_OPERATORS`.
``data/manifest.json`` is the machine-readable index of the catalog.

Truncated base64 listings in the source material were completed with the
payloads under ``data/payloads/`` so that every fixture decodes cleanly.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass
from importlib import resources
from typing import Optional

from didlkit.errors import DidlkitError

PDF_URL = "http://purl.lanl.gov/tech/pdf/015997845.pdf"
PS_URL = "http://purl.lanl.gov/tech/ps/015997845.ps"

_DOCUMENTS = {
    "table2": "parse-ok",
    "table3": "parse-ok",
    "table4": "parse-ok",
    "table5": "parse-ok",
    "table6": "parse-ok",
    "table7": "parse-ok",
    "table8": "parse-ok",
    "table9": "parse-ok",
    "table10": "parse-ok",
    "sample75": "parse-ok",
}


@dataclass(frozen=True)
class FixtureEntry:
    name: str
    kind: str  # document | payload | manifest
    expected: str  # parse-ok | rule:<id> | fatal:<code> | n/a
    base: Optional[str] = None
    operator: Optional[str] = None


def _data(name: str) -> bytes:
    ref = resources.files("didlkit.fixtures").joinpath("data").joinpath(name)
    try:
        return ref.read_bytes()
    except (FileNotFoundError, IsADirectoryError):
        raise DidlkitError(f"no such fixture file: {name}") from None


def load_payload(name: str) -> bytes:
    """Raw datastream bytes referenced by the document fixtures."""
    return _data(f"payloads/{name}")


def _pdf_b64() -> str:
    return base64.b64encode(load_payload("article.pdf")).decode()


def _chunked(b64: str) -> list:
    return [b64[i:i + 76] for i in range(0, len(b64), 76)]


def _flipped_pdf_b64() -> str:
    raw = bytearray(load_payload("article.pdf"))
    raw[10] ^= 0x01
    return base64.b64encode(bytes(raw)).decode()


def _sub(text: str, old: str, new: str, count: int = 1) -> str:
    if old not in text:
        raise DidlkitError(f"mutation anchor missing: {old[:40]!r}")
    return text.replace(old, new, count)


# Each operator rewrites the table9 source so that validation yields exactly
# the named rule finding (or the parser the named fatal code).
def _m_drop_mimetype(t: str) -> str:
    return _sub(t, '<didl:Resource mimeType="application/ps" ref=', "<didl:Resource ref=")


def _m_dual_provision(t: str) -> str:
    ref = f'<didl:Resource mimeType="application/ps" ref="{PS_URL}"'
    return _sub(t, ref + "/>", ref + ">inline too</didl:Resource>")


def _m_corrupt_base64(t: str) -> str:
    first = _chunked(_pdf_b64())[0]
    return _sub(t, first, first[:-1] + "!")


def _m_bad_mime(t: str) -> str:
    return _sub(t, 'mimeType="application/ps"', 'mimeType="application ps"')


def _m_mixed_mime(t: str) -> str:
    return _sub(t, 'mimeType="application/pdf" encoding="base64"',
                'mimeType="application/postscript" encoding="base64"')


def _m_empty_component(t: str) -> str:
    return _sub(t, f'      <didl:Resource mimeType="application/ps" ref="{PS_URL}"/>\n', "")


def _m_stray_resource(t: str) -> str:
    return _sub(t, "<didl:Item>",
                f'<didl:Item>\n    <didl:Resource mimeType="application/pdf" ref="{PDF_URL}"/>')


def _m_duplicate_id(t: str) -> str:
    return _sub(t, "<didl:Component>", '<didl:Component id="dup">', count=2)


def _m_dangling_annotation(t: str) -> str:
    block = ('    <didl:Annotation target="uuid-no-such-node">\n'
             '      <didl:Descriptor>\n'
             '        <didl:Statement mimeType="text/plain">orphaned note</didl:Statement>\n'
             '      </didl:Descriptor>\n'
             '    </didl:Annotation>\n  </didl:Item>')
    return _sub(t, "  </didl:Item>", block)


def _m_relative_identifier(t: str) -> str:
    return _sub(t, "info:doi/10.1045/july95-arms", "not a uri")


def _m_bad_document_id(t: str) -> str:
    return _sub(t, '<didl:DIDL xmlns:didl=', '<didl:DIDL DIDLDocumentId="relative/id" xmlns:didl=')


def _m_corrupt_payload(t: str) -> str:
    good = _chunked(_pdf_b64())
    bad = _chunked(_flipped_pdf_b64())
    for old, new in zip(good, bad):
        if old != new:
            t = _sub(t, old, new)
    return t


def _m_bad_content_encoding(t: str) -> str:
    return _sub(t, '<didl:Resource mimeType="application/ps" ref=',
                '<didl:Resource mimeType="application/ps" contentEncoding="rot13" ref=')


def _m_bare_item(t: str) -> str:
    start = t.index("    <didl:Component>")
    end = t.index("  </didl:Item>")
    return t[:start] + t[end:]


def _m_reference_element(t: str) -> str:
    return _sub(t, "<didl:Item>", '<didl:Item>\n    <didl:Reference target="elsewhere"/>')


def _m_truncated(t: str) -> str:
    return t[: len(t) // 2]


def _m_doctype(t: str) -> str:
    return _sub(t, "?>\n<didl:DIDL", '?>\n<!DOCTYPE didl [<!ENTITY x "y">]>\n<didl:DIDL')


def _m_wrong_encoding(t: str) -> str:
    return _sub(t, 'encoding="UTF-8"?>', 'encoding="ISO-8859-1"?>')


MUTATION_OPERATORS: dict[str, tuple] = {
    # operator -> (expected outcome, rewrite, deep validation required)
    "drop-mimetype": ("rule:R3", _m_drop_mimetype, False),
    "dual-provision": ("rule:R1", _m_dual_provision, False),
    "corrupt-base64": ("rule:R2", _m_corrupt_base64, False),
    "bad-mime": ("rule:R3", _m_bad_mime, False),
    "mixed-mime": ("rule:R4", _m_mixed_mime, False),
    "empty-component": ("rule:R4", _m_empty_component, False),
    "stray-resource": ("rule:R5", _m_stray_resource, False),
    "duplicate-id": ("rule:R6", _m_duplicate_id, False),
    "dangling-annotation": ("rule:R6b", _m_dangling_annotation, False),
    "relative-identifier": ("rule:R7", _m_relative_identifier, False),
    "bad-document-id": ("rule:R8", _m_bad_document_id, False),
    "corrupt-payload": ("rule:R9", _m_corrupt_payload, True),
    "bad-content-encoding": ("rule:R10", _m_bad_content_encoding, False),
    "bare-item": ("rule:W1", _m_bare_item, False),
    "reference-element": ("fatal:E-REFERENCE-REMOVED", _m_reference_element, False),
    "truncated": ("fatal:E-XML", _m_truncated, False),
    "doctype": ("fatal:E-DTD", _m_doctype, False),
    "wrong-encoding": ("fatal:E-ENCODING", _m_wrong_encoding, False),
}


def catalog() -> tuple:
    """Every fixture the corpus provides, documents first, then mutants."""
    entries = [FixtureEntry(name, "document", expected)
               for name, expected in sorted(_DOCUMENTS.items())]
    for op, (expected, _, _) in MUTATION_OPERATORS.items():
        entries.append(FixtureEntry(f"mutant-table9-{op}", "document", expected,
                                    base="table9", operator=op))
    entries.append(FixtureEntry("manifest-article", "manifest", "n/a"))
    return tuple(entries)


def load_fixture(name: str) -> bytes:
    """Fixture bytes by catalog name; mutants are derived on the fly."""
    if name in _DOCUMENTS:
        return _data(f"{name}.xml")
    if name == "manifest-article":
        return _data("manifest-article.json")
    if name.startswith("mutant-table9-"):
        op = name[len("mutant-table9-"):]
        if op in MUTATION_OPERATORS:
            _, rewrite, _ = MUTATION_OPERATORS[op]
            return rewrite(_data("table9.xml").decode("utf-8")).encode("utf-8")
    raise DidlkitError(f"no such fixture: {name}")


def deep_fetch_map() -> dict:
    """URI -> bytes map resolving every by-reference URL in the corpus."""
    return {PDF_URL: load_payload("article.pdf"), PS_URL: load_payload("article.ps")}
