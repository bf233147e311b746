"""XML namespace URIs and the fixed prefix table used on output."""

from __future__ import annotations

from dataclasses import dataclass

DIDL_NS = "urn:mpeg:mpeg21:2002:02-DIDL-NS"
DII_NS = "urn:mpeg:mpeg21:2002:01-DII-NS"
REL_NS = "urn:mpeg:mpeg21:2003:01-REL-R-NS"
DEFAULT_EXT_NS = "http://library.lanl.gov/2005-08/aDORe/DIDLextension/"
INTEGRITY_NS = "urn:x-didlkit:integrity:1"

XML_NS = "http://www.w3.org/XML/1998/namespace"
XMLDSIG_NS = "http://www.w3.org/2000/09/xmldsig#"
OAI_NS = "http://www.openarchives.org/OAI/2.0/"
OAI_DC_NS = "http://www.openarchives.org/OAI/2.0/oai_dc/"
DC_NS = "http://purl.org/dc/elements/1.1/"
DCTERMS_NS = "http://purl.org/dc/terms/"
ADMIN_NS = "http://library.lanl.gov/2004-01/STB-RL/DIADM"

# Preferred prefixes for namespaces that routinely show up in documents.
# Anything else gets a generated ns1, ns2, ... prefix in first-use order.
WELL_KNOWN_PREFIXES: dict[str, str] = {
    DIDL_NS: "didl",
    DII_NS: "dii",
    REL_NS: "rel",
    DEFAULT_EXT_NS: "diext",
    INTEGRITY_NS: "dint",
    XMLDSIG_NS: "dsig",
    OAI_DC_NS: "oai_dc",
    DC_NS: "dc",
    DCTERMS_NS: "dcterms",
    ADMIN_NS: "diadm",
}


@dataclass(frozen=True)
class NamespaceTable:
    """Namespace configuration for the codec.

    The DIDL and DII namespaces are fixed by the format; only the extension
    namespace used for repository attributes (document creation stamps) is
    configurable.
    """

    didl_ns: str = DIDL_NS
    dii_ns: str = DII_NS
    rel_ns: str = REL_NS
    ext_ns: str = DEFAULT_EXT_NS

    def __post_init__(self) -> None:
        if self.didl_ns != DIDL_NS or self.dii_ns != DII_NS:
            raise ValueError("the DIDL and DII namespace URIs are fixed")
