from __future__ import annotations

import base64
import gzip
import hashlib
import http.server
import threading
import zlib

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from didlkit import codec, fixtures, model, resourceio
from didlkit.errors import (DecodeError, FetchError, NonDigitalResourceError,
                            UnsupportedEncodingError)


def _table8_component() -> model.Component:
    doc = codec.parse_didl(fixtures.load_fixture("table8")).document
    return doc.root_entities[0].children[0]


class TestMaterialize:
    def test_by_reference_through_local_fetcher(self, tmp_path):
        pdf = fixtures.load_payload("article.pdf")
        target = tmp_path / "purl.lanl.gov" / "tech" / "pdf"
        target.mkdir(parents=True)
        (target / "015997845.pdf").write_bytes(pdf)
        doc = codec.parse_didl(fixtures.load_fixture("table2")).document
        resource = doc.root_entities[0].children[0].resources[0]
        assert resourceio.materialize(resource, resourceio.LocalFetcher(tmp_path)) == pdf

    def test_inline_base64(self):
        resource = model.Resource(mime_type="text/plain",
                                  provision=model.ByValueText("TWFu"), encoding="base64")
        assert resourceio.materialize(resource) == b"\x4d\x61\x6e"

    def test_empty_base64(self):
        resource = model.Resource(mime_type="text/plain",
                                  provision=model.ByValueText(""), encoding="base64")
        assert resourceio.materialize(resource) == b""

    def test_unencoded_text_is_utf8(self):
        resource = model.Resource(mime_type="text/plain",
                                  provision=model.ByValueText("héllo"))
        assert resourceio.materialize(resource) == "héllo".encode("utf-8")

    def test_inline_xml_whitespace_insensitive(self):
        compact = codec._read_xml(b"<a xmlns='urn:x'><b>t</b></a>")
        pretty = codec._read_xml(b"<a xmlns='urn:x'>\n  <b>t</b>\n</a>")
        r1 = model.Resource(mime_type="text/xml", provision=model.ByValueXml((compact,)))
        r2 = model.Resource(mime_type="text/xml", provision=model.ByValueXml((pretty,)))
        assert resourceio.materialize(r1) == resourceio.materialize(r2)

    def test_invalid_base64_decode_error(self):
        resource = model.Resource(mime_type="text/plain",
                                  provision=model.ByValueText("@@@@"), encoding="base64")
        with pytest.raises(DecodeError):
            resourceio.materialize(resource)

    def test_truncated_gzip_decode_error(self):
        broken = gzip.compress(b"payload")[:-4]
        resource = model.Resource(mime_type="text/plain",
                                  provision=model.ByValueText(base64.b64encode(broken).decode()),
                                  encoding="base64", content_encoding=("gzip",))
        with pytest.raises(DecodeError):
            resourceio.materialize(resource)

    def test_unsupported_content_encoding(self):
        resource = model.Resource(mime_type="text/plain",
                                  provision=model.ByValueText("eA=="), encoding="base64",
                                  content_encoding=("rot13",))
        with pytest.raises(UnsupportedEncodingError):
            resourceio.materialize(resource)

    def test_non_digital_scheme_refused(self):
        resource = model.Resource(mime_type="text/plain",
                                  provision=model.ByReference("urn:isbn:0451450523"))
        with pytest.raises(NonDigitalResourceError):
            resourceio.materialize(resource, resourceio.ReplayFetcher())

    def test_by_reference_without_fetcher(self):
        resource = model.Resource(mime_type="text/plain",
                                  provision=model.ByReference("http://e.org/x"))
        with pytest.raises(FetchError):
            resourceio.materialize(resource)

    def test_encoding_chain_reverse_order(self):
        original = b"order matters " * 10
        wrapped = zlib.compress(gzip.compress(original, mtime=0))
        resource = model.Resource(
            mime_type="application/octet-stream",
            provision=model.ByValueText(base64.b64encode(wrapped).decode()),
            encoding="base64", content_encoding=("gzip", "deflate"))
        assert resourceio.materialize(resource) == original


class TestEmbedByValue:
    def test_matches_by_value_shape(self):
        pdf = fixtures.load_payload("article.pdf")
        resource = resourceio.embed_by_value(pdf, "application/pdf")
        assert resource.encoding == "base64"
        assert isinstance(resource.provision, model.ByValueText)
        assert resourceio.materialize(resource) == pdf

    def test_empty_payload(self):
        resource = resourceio.embed_by_value(b"", "application/octet-stream")
        assert resource.provision.text == ""
        assert resourceio.materialize(resource) == b""

    def test_gzip_compresses_zero_block(self):
        block = bytes(1 << 20)
        resource = resourceio.embed_by_value(block, "application/octet-stream", "gzip")
        stored = len(resource.provision.text)
        assert stored < 10 * 1024
        assert resourceio.materialize(resource) == block

    def test_gzip_output_deterministic(self):
        a = resourceio.embed_by_value(b"same bytes", "text/plain", "gzip")
        b = resourceio.embed_by_value(b"same bytes", "text/plain", "gzip")
        assert a == b

    @settings(max_examples=60, deadline=None)
    @given(data=st.binary(max_size=4096),
           chain=st.lists(st.sampled_from(["gzip", "deflate"]), max_size=2))
    def test_round_trip_property(self, data, chain):
        resource = resourceio.embed_by_value(data, "application/octet-stream",
                                             chain[0] if chain else None)
        if len(chain) == 2:
            inner = resourceio.materialize(resource)
            assert inner == data
            doubled = resourceio._apply_encoding(
                resourceio._apply_encoding(data, chain[0]), chain[1])
            stacked = model.Resource(
                mime_type="application/octet-stream",
                provision=model.ByValueText(base64.b64encode(doubled).decode()),
                encoding="base64", content_encoding=tuple(chain))
            assert resourceio.materialize(stacked) == data
        else:
            assert resourceio.materialize(resource) == data


class TestComponentEquivalence:
    def test_table8_equivalent(self, corpus_fetcher):
        report = resourceio.check_component_equivalence(_table8_component(), corpus_fetcher)
        assert report.equivalent
        expected = hashlib.sha256(fixtures.load_payload("article.pdf")).hexdigest()
        assert [digest for _, digest in report.digests] == [expected, expected]

    def test_singleton_equivalent(self):
        comp = model.Component(resources=(resourceio.embed_by_value(b"one", "text/plain"),))
        report = resourceio.check_component_equivalence(comp)
        assert report.equivalent and len(report.digests) == 1

    def test_flipped_octet_not_equivalent(self, corpus_fetcher):
        comp = _table8_component()
        raw = bytearray(resourceio.materialize(comp.resources[1]))
        raw[0] ^= 0x01
        flipped = resourceio.embed_by_value(bytes(raw), "application/pdf")
        import dataclasses
        comp = dataclasses.replace(comp, resources=(comp.resources[0], flipped))
        report = resourceio.check_component_equivalence(comp, corpus_fetcher)
        assert not report.equivalent
        digests = {digest for _, digest in report.digests}
        assert len(digests) == 2
        assert hashlib.sha256(bytes(raw)).hexdigest() in digests

    def test_digest_stability_with_replay(self, corpus_fetcher):
        comp = _table8_component()
        first = resourceio.check_component_equivalence(comp, corpus_fetcher)
        second = resourceio.check_component_equivalence(comp, corpus_fetcher)
        assert first == second

    def test_error_annotated_with_path(self):
        comp = model.Component(resources=(
            model.Resource(mime_type="text/plain",
                           provision=model.ByReference("http://e.org/missing")),))
        with pytest.raises(FetchError, match="resource at /0"):
            resourceio.check_component_equivalence(comp, resourceio.ReplayFetcher())


class TestFetchers:
    def test_replay_unknown(self):
        with pytest.raises(FetchError):
            resourceio.ReplayFetcher().fetch("http://e.org/x")

    def test_replay_records_upstream(self):
        upstream = resourceio.ReplayFetcher({"http://e.org/x": b"42"})
        recorder = resourceio.ReplayFetcher(upstream=upstream)
        assert recorder.fetch("http://e.org/x") == b"42"
        assert recorder.mapping["http://e.org/x"] == b"42"

    def test_local_missing_file(self, tmp_path):
        with pytest.raises(FetchError):
            resourceio.LocalFetcher(tmp_path).fetch("http://e.org/nope.bin")

    def test_local_refuses_escape(self, tmp_path):
        (tmp_path / "data").mkdir()
        with pytest.raises(FetchError):
            resourceio.LocalFetcher(tmp_path / "data").fetch("http://e.org/../../etc/passwd")

    def test_local_refuses_sibling_prefix_escape(self, tmp_path):
        (tmp_path / "data").mkdir()
        (tmp_path / "data-evil").mkdir()
        (tmp_path / "data-evil" / "secret.bin").write_bytes(b"hidden")
        fetcher = resourceio.LocalFetcher(tmp_path / "data")
        with pytest.raises(FetchError):
            fetcher.fetch("http://e.org/../../data-evil/secret.bin")


class _Handler(http.server.BaseHTTPRequestHandler):
    payload = b"served-bytes"

    def do_GET(self):  # noqa: N802
        if self.path.startswith("/hop/"):
            remaining = int(self.path.rsplit("/", 1)[1])
            target = f"/hop/{remaining - 1}" if remaining > 1 else "/data"
            self.send_response(302)
            self.send_header("Location", target)
            self.end_headers()
        elif self.path == "/data":
            self.send_response(200)
            self.send_header("Content-Length", str(len(self.payload)))
            self.end_headers()
            self.wfile.write(self.payload)
        else:
            self.send_response(404)
            self.end_headers()

    def log_message(self, *args):
        pass


@pytest.fixture(scope="module")
def http_base():
    server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()


class TestHttpFetcher:
    def test_plain_get(self, http_base):
        assert resourceio.HttpFetcher().fetch(f"{http_base}/data") == b"served-bytes"

    def test_follows_bounded_redirects(self, http_base):
        fetcher = resourceio.HttpFetcher(max_redirects=5)
        assert fetcher.fetch(f"{http_base}/hop/5") == b"served-bytes"
        with pytest.raises(FetchError, match="redirect"):
            fetcher.fetch(f"{http_base}/hop/7")

    def test_404_is_fetch_error(self, http_base):
        with pytest.raises(FetchError, match="404"):
            resourceio.HttpFetcher().fetch(f"{http_base}/absent")

    def test_size_cap(self, http_base):
        with pytest.raises(FetchError, match="size cap"):
            resourceio.HttpFetcher(max_bytes=4).fetch(f"{http_base}/data")

    def test_refuses_other_schemes(self):
        with pytest.raises(FetchError):
            resourceio.HttpFetcher().fetch("ftp://e.org/file")
