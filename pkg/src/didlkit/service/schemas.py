"""Request/response models for the JSON API."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field

from didlkit import dii, model, resourceio
from didlkit.errors import DecodeError, FetchError


class MetadataBlockModel(BaseModel):
    label: str = ""
    xml: str


class DatastreamModel(BaseModel):
    mime_type: str
    ref: Optional[str] = None
    base64: Optional[str] = None
    xml: Optional[str] = None
    created: Optional[str] = None
    format_id: Optional[str] = None
    extra_locations: list[str] = Field(default_factory=list)
    embed: str = "by-ref"


class ManifestModel(BaseModel):
    content_id: str
    metadata: list[MetadataBlockModel] = Field(default_factory=list)
    datastreams: list[DatastreamModel] = Field(default_factory=list)


class IngestResponse(BaseModel):
    package_id: str
    created: str


class PackageHeaderModel(BaseModel):
    package_id: str
    created: str
    content_ids: list[str]


class PackageListResponse(BaseModel):
    records: list[PackageHeaderModel]
    next_cursor: Optional[str] = None


class PackageRecordModel(BaseModel):
    package_id: str
    created: str
    content_ids: list[str]
    item_xml_ids: list[str]


class VersionEntry(BaseModel):
    package_id: str
    created: str


class FindingModel(BaseModel):
    rule: str
    severity: str
    path: str
    message: str


class ValidationResponse(BaseModel):
    passed: bool
    findings: list[FindingModel]


class IdentifierEntry(BaseModel):
    value: str
    host: str


class RelatedEntry(BaseModel):
    value: str
    relationship_type: Optional[str] = None
    host: str


class TripleEntry(BaseModel):
    subject: str
    predicate: str
    object: str


class ComponentEntry(BaseModel):
    path: str
    xml_id: Optional[str] = None
    mime_type: str
    resources: int
    digests: Optional[dict[str, str]] = None


class InspectResponse(BaseModel):
    document_id: Optional[str] = None
    document_created: Optional[str] = None
    identifiers: list[IdentifierEntry]
    related: list[RelatedEntry]
    relationships: list[TripleEntry]
    components: list[ComponentEntry]


class ServiceInfo(BaseModel):
    service: str = "didlkit"
    version: str
    repository_name: str
    packages: int


def inspect_document(doc: model.DidlDocument, fetcher=None) -> InspectResponse:
    """Summarize a document: identifiers, derived relationships, components.

    Component digests are reported when every resource can be materialized
    (inline payloads always can; by-reference ones need a fetcher).
    """
    components = []
    for path, node in model.iter_with_paths(doc):
        if not isinstance(node, model.Component):
            continue
        digests: Optional[dict[str, str]] = None
        try:
            report = resourceio.check_component_equivalence(node, fetcher)
            digests = {f"{path}{rel}": digest for rel, digest in report.digests}
        except (FetchError, DecodeError):
            pass
        components.append(ComponentEntry(path=path, xml_id=node.xml_id,
                                         mime_type=node.resources[0].mime_type,
                                         resources=len(node.resources), digests=digests))
    return InspectResponse(
        document_id=doc.document_id,
        document_created=doc.document_created,
        identifiers=[IdentifierEntry(value=i.value, host=i.host_entity)
                     for i in dii.extract_identifiers(doc)],
        related=[RelatedEntry(value=r.value, relationship_type=r.relationship_type,
                              host=r.host_entity)
                 for r in dii.extract_related(doc)],
        relationships=[TripleEntry(subject=t.subject, predicate=t.predicate, object=t.object)
                       for t in model.derive_relationships(doc)],
        components=components,
    )
