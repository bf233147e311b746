from __future__ import annotations

import pytest

from didlkit import codec, fixtures, model
from didlkit.errors import ModelError, PathError
from didlkit.xmltree import element

from genutil import random_document


def _doc(name: str) -> model.DidlDocument:
    result = codec.parse_didl(fixtures.load_fixture(name))
    assert result.document is not None, result.diagnostics
    return result.document


class TestFindById:
    def test_sample_item(self, sample75_doc):
        node = model.find_by_id(sample75_doc, "uuid-00004342-c477-11d8-a819-b1db893d21e6")
        assert isinstance(node, model.Item)
        assert node is sample75_doc.root_entities[0]

    def test_sample_pdf_component(self, sample75_doc):
        node = model.find_by_id(sample75_doc, "uuid-00005e90-c687-11d8-a819-b1db893d21e6")
        assert isinstance(node, model.Component)
        assert node.resources[0].mime_type == "application/pdf"

    def test_absent_id(self, sample75_doc):
        assert model.find_by_id(sample75_doc, "no-such-id") is None

    def test_never_more_than_one(self, sample75_doc):
        ids = [xml_id for _, xml_id in model.collect_xml_ids(sample75_doc)]
        assert len(ids) == len(set(ids))


class TestEntityKind:
    def test_container(self):
        assert model.entity_kind(_doc("table10").root_entities[0]) == "container"

    def test_component(self):
        item = _doc("table8").root_entities[0]
        assert model.entity_kind(item.children[0]) == "component"

    def test_statement(self):
        item = _doc("table4").root_entities[0]
        assert model.entity_kind(item.descriptors[0].statements[0]) == "statement"

    def test_choice_is_opaque(self):
        node = element("urn:mpeg:mpeg21:2002:02-DIDL-NS", "Choice")
        assert model.entity_kind(node) == "choice"

    def test_rejects_non_nodes(self):
        with pytest.raises(ModelError):
            model.entity_kind("item")  # type: ignore[arg-type]


class TestDeriveRelationships:
    def test_sample_identifier_triple(self, sample75_doc):
        triples = model.derive_relationships(sample75_doc)
        assert model.RelationshipTriple(
            "uuid-00004342-c477-11d8-a819-b1db893d21e6", "hasIdentifier",
            "info:doi/10.1045/july95-arms") in triples

    def test_sample_has_three_resources(self, sample75_doc):
        triples = model.derive_relationships(sample75_doc)
        assert sum(1 for t in triples if t.predicate == "hasResource") == 3

    def test_empty_item_empty_list(self):
        doc = model.DidlDocument(root_entities=(model.Item(),))
        assert model.derive_relationships(doc) == ()

    def test_is_part_of_item(self):
        inner = model.Item(xml_id="uuid-in")
        outer = model.Item(xml_id="uuid-out", children=(inner,))
        doc = model.DidlDocument(root_entities=(outer,))
        assert model.RelationshipTriple("uuid-in", "isPartOfItem", "uuid-out") in \
            model.derive_relationships(doc)

    def test_closed_predicate_set(self, sample75_doc, table9_doc):
        for doc in (sample75_doc, table9_doc):
            for triple in model.derive_relationships(doc):
                assert triple.predicate in model.DERIVED_PREDICATES

    @pytest.mark.parametrize("seed", range(25))
    def test_pure_under_round_trip(self, seed):
        doc = random_document(seed)
        again = codec.parse_didl(codec.serialize_didl(doc)).document
        assert model.derive_relationships(doc) == model.derive_relationships(again)


class TestPaths:
    def test_get_node_roundtrip(self, table9_doc):
        for path, node in model.iter_with_paths(table9_doc):
            assert model.get_node(table9_doc, path) is node

    def test_document_order(self, table9_doc):
        paths = [path for path, _ in model.iter_with_paths(table9_doc)]
        assert paths == sorted(paths, key=model.path_key)

    def test_bad_paths(self, table9_doc):
        with pytest.raises(PathError):
            model.get_node(table9_doc, "/9")
        with pytest.raises(PathError):
            model.get_node(table9_doc, "/0/99")
        with pytest.raises(PathError):
            model.get_node(table9_doc, "/zero")

    def test_replace_node(self, table9_doc):
        target = "/0/3/0"
        original = model.get_node(table9_doc, target)
        replacement = model.Resource(mime_type=original.mime_type,
                                     provision=model.ByReference("http://example.org/alt.ps"))
        updated = model.replace_node(table9_doc, target, replacement)
        assert model.get_node(updated, target).provision.uri == "http://example.org/alt.ps"
        assert model.get_node(table9_doc, target) is original  # source untouched


class TestConstructionInvariants:
    def test_empty_descriptor_rejected(self):
        with pytest.raises(ModelError):
            model.Descriptor()

    def test_empty_container_rejected(self):
        with pytest.raises(ModelError):
            model.Container(children=())

    def test_component_needs_resources(self):
        with pytest.raises(ModelError):
            model.Component(resources=())

    def test_container_child_kinds(self):
        res = model.Resource(mime_type="text/plain", provision=model.ByValueText("x"))
        comp = model.Component(resources=(res,))
        with pytest.raises(ModelError):
            model.Container(children=(comp,))  # components never sit in containers

    def test_document_root_kinds(self):
        res = model.Resource(mime_type="text/plain", provision=model.ByValueText("x"))
        with pytest.raises(ModelError):
            model.DidlDocument(root_entities=(model.Component(resources=(res,)),))

    def test_document_needs_entities(self):
        with pytest.raises(ModelError):
            model.DidlDocument(root_entities=())

    def test_fragment_non_empty(self):
        with pytest.raises(ModelError):
            model.Fragment("")

    def test_by_value_xml_needs_content(self):
        with pytest.raises(ModelError):
            model.ByValueXml(())


class TestCrossNodeInvariants:
    def test_duplicate_ids_detected(self):
        doc = model.DidlDocument(root_entities=(
            model.Item(xml_id="uuid-1"), model.Item(xml_id="uuid-1")))
        with pytest.raises(ModelError, match="duplicate XML ID"):
            model.verify_invariants(doc)

    def test_mixed_mime_detected(self):
        comp = model.Component(resources=(
            model.Resource(mime_type="text/plain", provision=model.ByValueText("a")),
            model.Resource(mime_type="text/html", provision=model.ByValueText("a"))))
        doc = model.DidlDocument(root_entities=(model.Item(children=(comp,)),))
        with pytest.raises(ModelError, match="mixes MIME types"):
            model.verify_invariants(doc)

    @pytest.mark.parametrize("seed", range(25))
    def test_generated_documents_hold(self, seed):
        model.verify_invariants(random_document(seed))

    def test_containment_closure(self, sample75_doc):
        # resources only under components, components only under items
        for path, node in model.iter_with_paths(sample75_doc):
            if isinstance(node, model.Resource):
                parent = model.get_node(sample75_doc, path.rsplit("/", 1)[0])
                assert isinstance(parent, model.Component)
            if isinstance(node, model.Component):
                parent = model.get_node(sample75_doc, path.rsplit("/", 1)[0])
                assert isinstance(parent, model.Item)
