"""Resolver endpoint: context-sensitive services keyed by content identifier.

Requests arrive as Z39.88 key/encoded-value pairs on the query string. The
referent (``rft_id``) is the asset's own identifier; the service
(``svc_id``) selects what comes back:

* ``versions`` - all packages carrying the identifier, newest first;
* ``locate`` (default) - redirect to the harvesting URL of the newest one;
* ``datastream`` - a fragment of the newest package holding the given
  XML ID, searched backwards through older versions.
"""

from __future__ import annotations

import urllib.parse
from dataclasses import dataclass
from typing import Mapping, Optional

from didlkit.errors import FragmentNotFoundError
from didlkit.repository import PackageStore
from didlkit.validator import is_absolute_uri

OPENURL_VERSION = "Z39.88-2004"
SERVICES = ("locate", "versions", "datastream")


@dataclass(frozen=True)
class OpenUrlOutcome:
    kind: str  # redirect | json | xml | error
    status: int
    payload: object = None
    location: Optional[str] = None


def _error(status: int, message: str) -> OpenUrlOutcome:
    return OpenUrlOutcome(kind="error", status=status, payload={"detail": message})


def handle_openurl(params: Mapping[str, list], store: PackageStore,
                   base_url: str) -> OpenUrlOutcome:
    single: dict[str, str] = {}
    for name, values in params.items():
        if len(values) != 1:
            return _error(400, f"parameter {name!r} is repeated")
        single[name] = values[0]

    url_ver = single.get("url_ver")
    if url_ver is not None and url_ver != OPENURL_VERSION:
        return _error(400, f"unsupported url_ver {url_ver!r}")
    rft_id = single.get("rft_id")
    if not rft_id or not is_absolute_uri(rft_id):
        return _error(400, "rft_id must be a single absolute URI")
    svc_id = single.get("svc_id", "locate")
    if svc_id not in SERVICES:
        return _error(400, f"svc_id must be one of {', '.join(SERVICES)}")

    versions = store.resolve_content(rft_id)
    if not versions:
        return _error(404, f"no stored package carries {rft_id!r}")

    if svc_id == "versions":
        return OpenUrlOutcome(kind="json", status=200, payload=[
            {"package_id": pid, "created": created} for pid, created in versions])

    if svc_id == "locate":
        newest = versions[0][0]
        target = (base_url.rstrip("/") + "/oai?verb=GetRecord&metadataPrefix=didl&identifier="
                  + urllib.parse.quote(newest, safe=""))
        return OpenUrlOutcome(kind="redirect", status=302, location=target)

    fragment = single.get("fragment")
    if not fragment:
        return _error(400, "the datastream service requires a fragment XML ID")
    for pid, _ in versions:
        try:
            return OpenUrlOutcome(kind="xml", status=200,
                                  payload=store.get_fragment(pid, fragment))
        except FragmentNotFoundError:
            continue
    return _error(404, f"no version of {rft_id!r} holds an element {fragment!r}")
