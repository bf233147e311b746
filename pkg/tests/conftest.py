from __future__ import annotations

from datetime import datetime, timezone

import pytest

from didlkit import codec, fixtures, repository, resourceio


@pytest.fixture
def table9_bytes() -> bytes:
    return fixtures.load_fixture("table9")


@pytest.fixture
def table9_doc(table9_bytes):
    result = codec.parse_didl(table9_bytes)
    assert result.document is not None, result.diagnostics
    return result.document


@pytest.fixture
def sample75_doc():
    result = codec.parse_didl(fixtures.load_fixture("sample75"))
    assert result.document is not None, result.diagnostics
    return result.document


@pytest.fixture
def corpus_fetcher() -> resourceio.ReplayFetcher:
    return resourceio.ReplayFetcher(fixtures.deep_fetch_map())


@pytest.fixture
def article_manifest() -> repository.AssetManifest:
    return repository.AssetManifest.from_json_bytes(fixtures.load_fixture("manifest-article"))


class TickingClock:
    """Deterministic clock advancing one second per call."""

    def __init__(self, start: datetime | None = None, step: int = 1):
        self.now = start or datetime(2026, 1, 1, 0, 0, 0, tzinfo=timezone.utc)
        self.step = step

    def __call__(self) -> datetime:
        from datetime import timedelta
        current = self.now
        self.now = current + timedelta(seconds=self.step)
        return current


@pytest.fixture
def ticking_clock() -> TickingClock:
    return TickingClock()


@pytest.fixture
def store(tmp_path) -> repository.PackageStore:
    return repository.PackageStore(tmp_path / "store")


def assert_axes_coherent(store: repository.PackageStore) -> None:
    """Every package is reachable by package id and by each of its content
    ids, and every content-id hit leads back to a package carrying it."""
    headers, cursor = store.list_packages(page_size=1_000_000)
    assert cursor is None
    seen_content = set()
    for header in headers:
        record = store.get_package(header.package_id)
        assert codec.parse_didl(record.document_bytes).document is not None
        for cid in record.content_ids:
            seen_content.add(cid)
            hits = [pid for pid, _ in store.resolve_content(cid)]
            assert header.package_id in hits
    for cid in seen_content:
        for pid, _ in store.resolve_content(cid):
            assert cid in store.get_package(pid).content_ids
