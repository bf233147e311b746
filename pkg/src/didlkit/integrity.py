"""Digest and signature blocks for datastreams and whole documents.

The scheme is deliberately small and verifiable: SHA-256 digests with an
optional detached Ed25519 signature over the raw digest, carried in an
artifact-defined XML vocabulary (namespace ``urn:x-didlkit:integrity:1``):

* component scope - a descriptor appended to the component whose statement
  holds ``<dint:Digest algorithm="sha-256">hex</dint:Digest>`` and, when
  signed, ``<dint:Signature algorithm="ed25519" keyId="..."
  signedAt="...">hex</dint:Signature>``;
* document scope - the same two elements as children of the document-info
  block. The document digest covers the canonical bytes of the document
  with its own integrity entries removed, so sealing needs no fixpoint.

Genuine W3C-signature subtrees found in a document are never interpreted;
verification reports them as ``foreign-signature`` so callers know a
different regime applies.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from typing import Mapping, Optional, Union

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (Ed25519PrivateKey,
                                                               Ed25519PublicKey)

from didlkit import codec, model, resourceio
from didlkit.errors import EquivalenceViolationError, SealError
from didlkit.namespaces import INTEGRITY_NS, XMLDSIG_NS
from didlkit.xmltree import XmlNode, all_text, element, get_attr

DIGEST_ALGORITHM = "sha-256"
SIGNATURE_ALGORITHM = "ed25519"

SigningKey = Union[Ed25519PrivateKey, bytes]
Keyring = Mapping[str, Union[Ed25519PublicKey, bytes]]


class Verdict(str, Enum):
    OK = "ok"
    DIGEST_MISMATCH = "digest-mismatch"
    SIGNATURE_INVALID = "signature-invalid"
    UNSEALED = "unsealed"
    FOREIGN_SIGNATURE = "foreign-signature"


@dataclass(frozen=True)
class IntegrityBlock:
    digest_hex: str
    scope: str  # document | component
    algorithm: str = DIGEST_ALGORITHM
    signed_at: Optional[str] = None
    key_id: Optional[str] = None
    signature_hex: Optional[str] = None

    def __post_init__(self) -> None:
        if len(self.digest_hex) != 64 or set(self.digest_hex) - set("0123456789abcdef"):
            raise SealError("digest must be 64 lowercase hex characters")
        if self.signature_hex is not None and self.key_id is None:
            raise SealError("a signature requires a key id")


def _load_private(key: SigningKey) -> Ed25519PrivateKey:
    if isinstance(key, Ed25519PrivateKey):
        return key
    return Ed25519PrivateKey.from_private_bytes(bytes(key))


def _load_public(key) -> Ed25519PublicKey:
    if isinstance(key, Ed25519PublicKey):
        return key
    return Ed25519PublicKey.from_public_bytes(bytes(key))


def _now_stamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _block_elements(block: IntegrityBlock) -> tuple:
    digest = element(INTEGRITY_NS, "Digest",
                     {(None, "algorithm"): block.algorithm}, (block.digest_hex,))
    if block.signature_hex is None:
        return (digest,)
    attrs = {(None, "algorithm"): SIGNATURE_ALGORITHM, (None, "keyId"): block.key_id}
    if block.signed_at is not None:
        attrs[(None, "signedAt")] = block.signed_at
    return (digest, element(INTEGRITY_NS, "Signature", attrs, (block.signature_hex,)))


def _block_from_elements(elements: list, scope: str) -> Optional[IntegrityBlock]:
    digest = signature = None
    for el in elements:
        if el.tag == (INTEGRITY_NS, "Digest"):
            digest = el
        elif el.tag == (INTEGRITY_NS, "Signature"):
            signature = el
    if digest is None:
        return None
    try:
        return IntegrityBlock(
            digest_hex=all_text(digest).strip(),
            scope=scope,
            algorithm=get_attr(digest, None, "algorithm", DIGEST_ALGORITHM),
            signed_at=get_attr(signature, None, "signedAt") if signature is not None else None,
            key_id=get_attr(signature, None, "keyId") if signature is not None else None,
            signature_hex=all_text(signature).strip() if signature is not None else None,
        )
    except SealError:
        # malformed block: treat as a digest that can never match
        return IntegrityBlock(digest_hex="0" * 64, scope=scope)


def _make_block(data_digest: str, scope: str, key: Optional[SigningKey],
                key_id: Optional[str], signed_at: Optional[str]) -> IntegrityBlock:
    if key is None:
        return IntegrityBlock(digest_hex=data_digest, scope=scope)
    if key_id is None:
        raise SealError("signing requires a key id")
    private = _load_private(key)
    signature = private.sign(bytes.fromhex(data_digest))
    return IntegrityBlock(digest_hex=data_digest, scope=scope,
                          signed_at=signed_at or _now_stamp(),
                          key_id=key_id, signature_hex=signature.hex())


def _verify_block(block: IntegrityBlock, data_digest: str, keyring: Keyring) -> Verdict:
    if block.algorithm != DIGEST_ALGORITHM or block.digest_hex != data_digest:
        return Verdict.DIGEST_MISMATCH
    if block.signature_hex is None:
        return Verdict.OK
    key = keyring.get(block.key_id) if block.key_id else None
    if key is None:
        return Verdict.SIGNATURE_INVALID
    try:
        _load_public(key).verify(bytes.fromhex(block.signature_hex),
                                 bytes.fromhex(block.digest_hex))
    except (InvalidSignature, ValueError):
        return Verdict.SIGNATURE_INVALID
    return Verdict.OK


# ---------------------------------------------------------------------------
# Component scope


def _is_integrity_descriptor(descriptor: model.Descriptor) -> bool:
    for stmt in descriptor.statements:
        root = model.statement_xml_root(stmt)
        if root is not None and root.ns == INTEGRITY_NS:
            return True
        if isinstance(stmt.provision, model.ByValueXml):
            if any(isinstance(c, XmlNode) and c.ns == INTEGRITY_NS
                   for c in stmt.provision.content):
                return True
    return False


def _has_foreign_signature(descriptors) -> bool:
    for descriptor in descriptors:
        for stmt in descriptor.statements:
            root = model.statement_xml_root(stmt)
            if root is not None and root.ns == XMLDSIG_NS:
                return True
    return False


def component_block(comp: model.Component) -> Optional[IntegrityBlock]:
    for descriptor in comp.descriptors:
        if _is_integrity_descriptor(descriptor):
            for stmt in descriptor.statements:
                if isinstance(stmt.provision, model.ByValueXml):
                    elements = [c for c in stmt.provision.content if isinstance(c, XmlNode)]
                    block = _block_from_elements(elements, "component")
                    if block is not None:
                        return block
    return None


def _component_digest(comp: model.Component, fetcher) -> str:
    report = resourceio.check_component_equivalence(comp, fetcher)
    if not report.equivalent:
        raise EquivalenceViolationError(
            "refusing to digest a component whose resources differ: "
            + ", ".join(f"{rel}={digest}" for rel, digest in report.digests))
    return report.digests[0][1]


def seal_component(comp: model.Component, fetcher=None, key: Optional[SigningKey] = None, *,
                   key_id: Optional[str] = None,
                   signed_at: Optional[str] = None) -> model.Component:
    """Append (or replace) the integrity descriptor for this component.

    The digest covers the materialized resource bytes; resources must be
    bit-equivalent or sealing refuses.
    """
    digest = _component_digest(comp, fetcher)
    block = _make_block(digest, "component", key, key_id, signed_at)
    stmt = model.Statement(mime_type="text/xml; charset=UTF-8",
                           provision=model.ByValueXml(_block_elements(block)))
    kept = tuple(d for d in comp.descriptors if not _is_integrity_descriptor(d))
    return dataclasses.replace(
        comp, descriptors=kept + (model.Descriptor(statements=(stmt,)),))


def verify_component(comp: model.Component, fetcher=None,
                     keyring: Optional[Keyring] = None) -> Verdict:
    """Recompute the component digest and check it (and any signature)."""
    block = component_block(comp)
    if block is None:
        if _has_foreign_signature(comp.descriptors):
            return Verdict.FOREIGN_SIGNATURE
        return Verdict.UNSEALED
    report = resourceio.check_component_equivalence(comp, fetcher)
    if not report.equivalent:
        return Verdict.DIGEST_MISMATCH
    return _verify_block(block, report.digests[0][1], keyring or {})


# ---------------------------------------------------------------------------
# Document scope


def _split_info(doc: model.DidlDocument) -> tuple:
    ours, rest = [], []
    for entry in doc.didl_info:
        if isinstance(entry, XmlNode) and entry.ns == INTEGRITY_NS:
            ours.append(entry)
        else:
            rest.append(entry)
    return ours, rest


def document_block(doc: model.DidlDocument) -> Optional[IntegrityBlock]:
    ours, _ = _split_info(doc)
    return _block_from_elements(ours, "document") if ours else None


def _document_digest(doc: model.DidlDocument, ext_ns: str) -> str:
    _, rest = _split_info(doc)
    stripped = dataclasses.replace(doc, didl_info=tuple(rest))
    return hashlib.sha256(codec.canonical_bytes(stripped, ext_ns=ext_ns)).hexdigest()


def seal_document(doc: model.DidlDocument, key: Optional[SigningKey] = None, *,
                  key_id: Optional[str] = None, signed_at: Optional[str] = None,
                  ext_ns: Optional[str] = None) -> model.DidlDocument:
    """Store a document-scope integrity block inside the document-info list.

    Re-sealing replaces any previous block, so at most one exists.
    """
    from didlkit.namespaces import DEFAULT_EXT_NS
    ext = ext_ns or DEFAULT_EXT_NS
    digest = _document_digest(doc, ext)
    block = _make_block(digest, "document", key, key_id, signed_at)
    _, rest = _split_info(doc)
    return dataclasses.replace(doc, didl_info=tuple(rest) + _block_elements(block))


def verify_document(doc: model.DidlDocument, keyring: Optional[Keyring] = None, *,
                    ext_ns: Optional[str] = None) -> Verdict:
    from didlkit.namespaces import DEFAULT_EXT_NS
    ext = ext_ns or DEFAULT_EXT_NS
    block = document_block(doc)
    if block is None:
        if any(isinstance(e, XmlNode) and e.ns == XMLDSIG_NS for e in doc.didl_info):
            return Verdict.FOREIGN_SIGNATURE
        return Verdict.UNSEALED
    return _verify_block(block, _document_digest(doc, ext), keyring or {})
