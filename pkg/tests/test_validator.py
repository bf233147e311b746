from __future__ import annotations

import json

import pytest

from didlkit import codec, fixtures, model, resourceio, validator

RULE_MUTANTS = [(op, spec) for op, spec in fixtures.MUTATION_OPERATORS.items()
                if spec[0].startswith("rule:")]
FATAL_MUTANTS = [(op, spec) for op, spec in fixtures.MUTATION_OPERATORS.items()
                 if spec[0].startswith("fatal:")]


class TestRuleCatalog:
    def test_twelve_rules(self):
        assert len(validator.rule_catalog()) == 12

    def test_ids_unique_and_sorted(self):
        ids = [rule.id for rule in validator.rule_catalog()]
        assert len(set(ids)) == len(ids)
        assert ids == ["R1", "R2", "R3", "R4", "R5", "R6", "R6b", "R7", "R8", "R9", "R10", "W1"]

    def test_deep_rule(self):
        by_id = {rule.id: rule for rule in validator.rule_catalog()}
        assert by_id["R9"].mode == validator.DEEP
        assert all(rule.mode == validator.SHALLOW for rid, rule in by_id.items() if rid != "R9")

    def test_w1_is_warning(self):
        by_id = {rule.id: rule for rule in validator.rule_catalog()}
        assert by_id["W1"].severity == "warning"
        assert all(rule.severity == "error" for rid, rule in by_id.items() if rid != "W1")


class TestCleanFixtures:
    def test_table9_zero_findings(self, table9_bytes):
        report = validator.validate_bytes(table9_bytes)
        assert report.passed
        assert report.findings == ()

    @pytest.mark.parametrize("name", [e.name for e in fixtures.catalog()
                                      if e.kind == "document" and e.expected == "parse-ok"])
    def test_every_document_fixture_passes(self, name):
        assert validator.validate_bytes(fixtures.load_fixture(name)).passed

    def test_deep_mode_on_clean_corpus(self, table9_bytes, corpus_fetcher):
        report = validator.validate_bytes(table9_bytes, fetcher=corpus_fetcher)
        assert report.passed and report.findings == ()


class TestMutationCatalog:
    def test_catalog_covers_every_rule(self):
        predicted = {spec[0].split(":", 1)[1] for _, spec in RULE_MUTANTS}
        assert predicted == {rule.id for rule in validator.rule_catalog()}

    @pytest.mark.parametrize("op,spec", RULE_MUTANTS, ids=[op for op, _ in RULE_MUTANTS])
    def test_mutant_yields_exactly_its_rule(self, op, spec, corpus_fetcher):
        expected, _, deep = spec
        data = fixtures.load_fixture(f"mutant-table9-{op}")
        report = validator.validate_bytes(data, fetcher=corpus_fetcher if deep else None)
        assert [f.rule for f in report.findings] == [expected.split(":", 1)[1]]

    @pytest.mark.parametrize("op,spec", FATAL_MUTANTS, ids=[op for op, _ in FATAL_MUTANTS])
    def test_fatal_mutants_reported(self, op, spec):
        expected_code = spec[0].split(":", 1)[1]
        data = fixtures.load_fixture(f"mutant-table9-{op}")
        report = validator.validate_bytes(data)
        assert not report.passed
        assert [f.rule for f in report.findings] == [expected_code]
        # and the strict parser treats them as fatal
        result = codec.parse_didl(data)
        assert result.document is None
        assert expected_code in {d.code for d in result.diagnostics}

    def test_warning_mutant_still_passes(self):
        report = validator.validate_bytes(fixtures.load_fixture("mutant-table9-bare-item"))
        assert report.passed
        assert [f.severity for f in report.findings] == ["warning"]

    def test_r3_finding_at_node_path(self):
        report = validator.validate_bytes(fixtures.load_fixture("mutant-table9-drop-mimetype"))
        assert report.findings[0].path == "/0/3/0"  # the second component's resource

    def test_r9_lists_two_digests(self, corpus_fetcher):
        report = validator.validate_bytes(fixtures.load_fixture("mutant-table9-corrupt-payload"),
                                          fetcher=corpus_fetcher)
        finding = report.findings[0]
        assert finding.rule == "R9"
        assert finding.message.count("=") >= 2


class TestValidateDocuments:
    def test_r2_rejects_wrong_encoding_token(self):
        resource = model.Resource(mime_type="text/plain",
                                  provision=model.ByValueText("eA=="), encoding="hex")
        doc = model.DidlDocument(root_entities=(
            model.Item(children=(model.Component(resources=(resource,)),)),))
        rules = [f.rule for f in validator.validate(doc).findings]
        assert rules == ["R2"]

    def test_r2_rejects_encoding_on_reference(self):
        resource = model.Resource(mime_type="text/plain",
                                  provision=model.ByReference("http://e.org/x"),
                                  encoding="base64")
        doc = model.DidlDocument(root_entities=(
            model.Item(children=(model.Component(resources=(resource,)),)),))
        assert [f.rule for f in validator.validate(doc).findings] == ["R2"]

    def test_r10_rejects_duplicates(self):
        resource = model.Resource(mime_type="text/plain", provision=model.ByValueText("x"),
                                  content_encoding=("gzip", "gzip"))
        doc = model.DidlDocument(root_entities=(
            model.Item(children=(model.Component(resources=(resource,)),)),))
        assert [f.rule for f in validator.validate(doc).findings] == ["R10"]

    def test_r7_trims_before_checking(self, sample75_doc):
        # the corpus document line-wraps the identifier text
        assert validator.validate(sample75_doc).passed

    def test_r7_flags_related_identifier_type(self):
        from didlkit.namespaces import DII_NS
        from didlkit.xmltree import element
        stmt = model.Statement(
            mime_type="text/xml; charset=UTF-8",
            provision=model.ByValueXml((element(
                DII_NS, "RelatedIdentifier",
                {(None, "relationshipType"): "not absolute"},
                ("info:doi/10.1045/x",)),)))
        doc = model.DidlDocument(root_entities=(
            model.Item(descriptors=(model.Descriptor(statements=(stmt,)),)),))
        errors = [f.rule for f in validator.validate(doc).findings if f.severity == "error"]
        assert errors == ["R7"]

    def test_r9_fetch_failures_tagged(self):
        resource = model.Resource(mime_type="text/plain",
                                  provision=model.ByReference("http://e.org/gone"))
        doc = model.DidlDocument(root_entities=(
            model.Item(children=(model.Component(resources=(resource,)),)),))
        report = validator.validate(doc, fetcher=resourceio.ReplayFetcher())
        assert [f.rule for f in report.findings] == ["R9-FETCH"]
        assert not report.passed


class TestReportShape:
    def test_deterministic_serialization(self, corpus_fetcher):
        data = fixtures.load_fixture("mutant-table9-corrupt-payload")
        a = validator.validate_bytes(data, fetcher=corpus_fetcher)
        b = validator.validate_bytes(data, fetcher=corpus_fetcher)
        assert a.to_text() == b.to_text()
        assert a.to_json() == b.to_json()

    def test_text_line_format(self):
        report = validator.validate_bytes(fixtures.load_fixture("mutant-table9-bad-mime"))
        line = report.to_text().strip()
        severity, rule, path, *_ = line.split(" ")
        assert (severity, rule, path) == ("error", "R3", "/0/3/0")

    def test_json_stable_keys(self):
        report = validator.validate_bytes(fixtures.load_fixture("mutant-table9-bad-mime"))
        payload = json.loads(report.to_json())
        assert list(payload) == ["findings", "passed"]

    def test_findings_in_document_order(self):
        data = fixtures.load_fixture("table9").replace(
            b'mimeType="text/xml; charset=UTF-8"', b'mimeType="broken"', 2)
        report = validator.validate_bytes(data)
        paths = [f.path for f in report.findings]
        assert paths == sorted(paths, key=model.path_key)

    def test_monotonic_under_clean_growth(self, table9_doc):
        report = validator.validate(table9_doc)
        assert report.passed
        item = table9_doc.root_entities[0]
        extra = model.Component(resources=(
            model.Resource(mime_type="text/plain", provision=model.ByValueText("more")),))
        import dataclasses
        grown = dataclasses.replace(item, children=item.children + (extra,))
        grown_doc = dataclasses.replace(table9_doc, root_entities=(grown,))
        assert validator.validate(grown_doc).passed
