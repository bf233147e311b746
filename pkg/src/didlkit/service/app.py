"""HTTP service exposing the store.

Two protocol endpoints carry the repository's public contract - ``/oai``
(OAI-PMH 2.0 parameter encoding, GET or POST) and ``/openurl`` (Z39.88
key/encoded-value on the query string) - plus a JSON API wrapping the core
operations for programmatic clients, including the thin-client CLI.
"""

from __future__ import annotations

from datetime import datetime, timezone
from typing import Optional

from fastapi import Body, FastAPI, HTTPException, Query, Request, Response
from fastapi.responses import JSONResponse, RedirectResponse

from didlkit import codec, validator
from didlkit.errors import (BadCursorError, DidlkitError, FragmentNotFoundError,
                            ManifestError, PackageNotFoundError, StoreError)
from didlkit.repository import AssetManifest, PackageStore
from didlkit.service import schemas
from didlkit.service.oai import OaiConfig, handle_oai
from didlkit.service.openurl import handle_openurl

XML_MEDIA_TYPE = "text/xml; charset=UTF-8"


def create_app(store: PackageStore, *, base_url: str = "http://localhost:8431",
               repository_name: str = "didlkit repository",
               admin_email: str = "admin@localhost", page_size: int = 100,
               fetcher=None, clock=None) -> FastAPI:
    config = OaiConfig(base_url=base_url, repository_name=repository_name,
                       admin_email=admin_email, page_size=page_size,
                       clock=clock or (lambda: datetime.now(timezone.utc)))
    app = FastAPI(title="didlkit", version=_version(), docs_url=None, redoc_url=None)
    app.state.store = store
    app.state.fetcher = fetcher

    @app.get("/", response_model=schemas.ServiceInfo)
    def service_info() -> schemas.ServiceInfo:
        return schemas.ServiceInfo(version=_version(), repository_name=repository_name,
                                   packages=len(store))

    # -- protocol endpoints --------------------------------------------------

    @app.get("/oai")
    def oai_get(request: Request) -> Response:
        params = _multi(request.query_params.multi_items())
        return Response(content=handle_oai(params, store, config), media_type=XML_MEDIA_TYPE)

    @app.post("/oai")
    async def oai_post(request: Request) -> Response:
        form = await request.form()
        params = _multi(form.multi_items())
        return Response(content=handle_oai(params, store, config), media_type=XML_MEDIA_TYPE)

    @app.get("/openurl")
    def openurl(request: Request) -> Response:
        outcome = handle_openurl(_multi(request.query_params.multi_items()), store, base_url)
        if outcome.kind == "redirect":
            return RedirectResponse(outcome.location, status_code=outcome.status)
        if outcome.kind == "xml":
            return Response(content=outcome.payload, media_type=XML_MEDIA_TYPE)
        return JSONResponse(status_code=outcome.status, content=outcome.payload)

    # -- JSON API ------------------------------------------------------------

    @app.post("/packages", response_model=schemas.IngestResponse, status_code=201)
    def ingest(manifest: schemas.ManifestModel) -> schemas.IngestResponse:
        try:
            asset = AssetManifest.from_dict(manifest.model_dump())
            package_id = store.ingest(asset, fetcher=fetcher, clock=clock)
        except (ManifestError, DidlkitError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        record = store.get_package(package_id)
        return schemas.IngestResponse(package_id=package_id, created=record.created)

    @app.get("/packages", response_model=schemas.PackageListResponse)
    def list_packages(from_: Optional[str] = Query(default=None, alias="from"),
                      until: Optional[str] = None, cursor: Optional[str] = None,
                      limit: int = Query(default=100, ge=1, le=1000),
                      ) -> schemas.PackageListResponse:
        try:
            headers, next_cursor = store.list_packages(from_=from_, until=until,
                                                       after=cursor, page_size=limit)
        except BadCursorError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        except StoreError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return schemas.PackageListResponse(
            records=[schemas.PackageHeaderModel(package_id=h.package_id, created=h.created,
                                                content_ids=list(h.content_ids))
                     for h in headers],
            next_cursor=next_cursor)

    @app.get("/package", response_model=schemas.PackageRecordModel)
    def get_package(package_id: str) -> schemas.PackageRecordModel:
        record = _get_record(package_id)
        return schemas.PackageRecordModel(package_id=record.package_id, created=record.created,
                                          content_ids=list(record.content_ids),
                                          item_xml_ids=list(record.item_xml_ids))

    @app.get("/package/document")
    def get_document(package_id: str) -> Response:
        return Response(content=_get_record(package_id).document_bytes,
                        media_type=XML_MEDIA_TYPE)

    @app.get("/package/fragment")
    def get_fragment(package_id: str, xml_id: str) -> Response:
        try:
            return Response(content=store.get_fragment(package_id, xml_id),
                            media_type=XML_MEDIA_TYPE)
        except (PackageNotFoundError, FragmentNotFoundError) as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None

    @app.get("/content", response_model=list[schemas.VersionEntry])
    def resolve_content(content_id: str) -> list:
        return [schemas.VersionEntry(package_id=pid, created=created)
                for pid, created in store.resolve_content(content_id)]

    @app.post("/documents/validate", response_model=schemas.ValidationResponse)
    def validate_document(body: bytes = Body(media_type="application/xml"),
                          deep: bool = False) -> schemas.ValidationResponse:
        report = validator.validate_bytes(body, fetcher=fetcher if deep else None)
        return schemas.ValidationResponse(
            passed=report.passed,
            findings=[schemas.FindingModel(rule=f.rule, severity=f.severity, path=f.path,
                                           message=f.message) for f in report.findings])

    @app.post("/documents/inspect", response_model=schemas.InspectResponse)
    def inspect(body: bytes = Body(media_type="application/xml")) -> schemas.InspectResponse:
        result = codec.parse_didl(body)
        if result.document is None:
            detail = "; ".join(f"{d.code} {d.message}" for d in result.diagnostics)
            raise HTTPException(status_code=422, detail=detail or "unparseable document")
        return schemas.inspect_document(result.document, fetcher)

    def _get_record(package_id: str):
        try:
            return store.get_package(package_id)
        except PackageNotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None

    def _multi(items) -> dict:
        params: dict[str, list] = {}
        for key, value in items:
            params.setdefault(key, []).append(value)
        return params

    return app


def _version() -> str:
    from didlkit import __version__
    return __version__
