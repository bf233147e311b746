from __future__ import annotations

import dataclasses
import json
from importlib import resources

import pytest

from didlkit import codec, fixtures, validator
from didlkit.errors import DidlkitError


class TestLoadFixture:
    def test_table9_shape(self):
        doc = codec.parse_didl(fixtures.load_fixture("table9")).document
        assert len(doc.root_entities) == 1
        assert len(doc.root_entities[0].children) == 2

    def test_sample_document_id(self):
        doc = codec.parse_didl(fixtures.load_fixture("sample75")).document
        assert doc.document_id == "info:lanl-repo/i/00002cb8-c477-11d8-a819-b1db893d21e6"

    def test_mutant_validates_to_its_rule(self):
        report = validator.validate_bytes(fixtures.load_fixture("mutant-table9-drop-mimetype"))
        assert [f.rule for f in report.findings] == ["R3"]

    def test_unknown_name(self):
        with pytest.raises(DidlkitError):
            fixtures.load_fixture("no-such-fixture")
        with pytest.raises(DidlkitError):
            fixtures.load_fixture("mutant-table9-no-such-operator")

    def test_payloads_match_embedded_base64(self):
        import base64
        doc = codec.parse_didl(fixtures.load_fixture("table9")).document
        embedded = doc.root_entities[0].children[0].resources[1].provision.text
        assert base64.b64decode(embedded) == fixtures.load_payload("article.pdf")

    def test_mutants_deterministic(self):
        name = "mutant-table9-corrupt-payload"
        assert fixtures.load_fixture(name) == fixtures.load_fixture(name)


class TestCatalog:
    def test_closed_under_operators(self):
        names = {entry.name for entry in fixtures.catalog()}
        for op in fixtures.MUTATION_OPERATORS:
            assert f"mutant-table9-{op}" in names
        for entry in fixtures.catalog():
            fixtures.load_fixture(entry.name)  # every entry loads

    def test_manifest_index_mirrors_catalog(self):
        raw = resources.files("didlkit.fixtures").joinpath("data/manifest.json").read_bytes()
        indexed = json.loads(raw)["fixtures"]
        assert indexed == [dataclasses.asdict(entry) for entry in fixtures.catalog()]

    def test_provenance_recorded_for_mutants(self):
        for entry in fixtures.catalog():
            if entry.name.startswith("mutant-"):
                assert entry.base == "table9" and entry.operator
            else:
                assert entry.operator is None

    def test_deep_fetch_map_resolves_corpus_refs(self):
        mapping = fixtures.deep_fetch_map()
        assert mapping[fixtures.PDF_URL] == fixtures.load_payload("article.pdf")
        assert mapping[fixtures.PS_URL] == fixtures.load_payload("article.ps")
