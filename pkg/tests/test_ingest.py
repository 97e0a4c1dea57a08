"""Site ingestion: hierarchy building, description files, splitting, synthесis."""

from __future__ import annotations

import json
import random

import pytest

from outofturn.errors import (
    AmbiguousLeaf,
    DuplicateAttributeInLabel,
    ParseError,
    SchemaError,
    SizeLimitExceeded,
)
from outofturn.evaluate import partial_evaluate
from outofturn.ingest import (
    RawEdge,
    RawNode,
    build_hierarchy,
    bundle_to_doc,
    generate_synthetic,
    load_site,
    parse_schema,
    raw_path_valuations,
    save_site,
    split_coalesced,
)
from outofturn.model import (
    Assignment,
    Branch,
    Catalog,
    CatalogItem,
    Leaf,
    Variable,
    enumerate_paths,
    leaf_content_refs,
    structurally_equal,
    validate_program,
)

from conftest import camera_doc, random_consistent_assignment


def camera_catalog_and_schema():
    doc = camera_doc()
    schema = parse_schema(doc["schema"])
    items = tuple(
        CatalogItem.from_mapping(e["id"], e["content"], e["values"])
        for e in doc["catalog"]["items"]
    )
    return Catalog(items), schema


class TestBuildHierarchy:
    def test_maker_then_type_shape(self):
        catalog, schema = camera_catalog_and_schema()
        program = build_hierarchy(catalog, schema, ["maker", "type"])
        assert validate_program(program) == []
        root = program.root
        shape = {
            e.variable.value: [c.variable.value for c in e.child.edges]
            for e in root.edges
        }
        assert shape == {
            "Canon": ["35mm", "APS"],
            "Nikon": ["35mm", "APS", "SLR"],
            "Minolta": ["35mm", "SLR"],
        }

    def test_type_then_maker_shape(self):
        catalog, schema = camera_catalog_and_schema()
        program = build_hierarchy(catalog, schema, ["type", "maker"])
        assert validate_program(program) == []
        shape = {
            e.variable.value: [c.variable.value for c in e.child.edges]
            for e in program.root.edges
        }
        assert shape == {
            "35mm": ["Canon", "Nikon", "Minolta"],
            "APS": ["Canon", "Nikon"],
            "SLR": ["Nikon", "Minolta"],
        }

    def test_singleton_catalog_builds_a_chain(self):
        _, schema = camera_catalog_and_schema()
        catalog = Catalog(
            (CatalogItem.from_mapping("only", "only", {"maker": "Nikon", "type": "SLR"}),)
        )
        program = build_hierarchy(catalog, schema, ["maker", "type"])
        root = program.root
        assert len(root.edges) == 1
        inner = root.edges[0].child
        assert len(inner.edges) == 1
        assert isinstance(inner.edges[0].child, Leaf)

    def test_leaf_item_set_is_order_invariant(self):
        rng = random.Random(3)
        from outofturn.model import Attribute, Schema

        for _ in range(5):
            attrs = tuple(
                Attribute(f"a{i}", tuple(f"v{j}" for j in range(rng.randint(2, 3))))
                for i in range(3)
            )
            schema = Schema(attrs)
            items = []
            seen = set()
            for n in range(rng.randint(3, 10)):
                values = {a.name: rng.choice(a.values) for a in attrs}
                key = tuple(sorted(values.items()))
                if key in seen:
                    continue
                seen.add(key)
                items.append(CatalogItem.from_mapping(f"i{n}", f"c{n}", values))
            catalog = Catalog(tuple(items))
            orders = []
            names = [a.name for a in attrs]
            for _ in range(10):
                rng.shuffle(names)
                orders.append(list(names))
            reference = None
            for order in orders:
                program = build_hierarchy(catalog, schema, order)
                assert validate_program(program) == []
                content = leaf_content_refs(program.root)
                if reference is None:
                    reference = content
                assert content == reference

    def test_identical_items_rejected(self):
        catalog, schema = camera_catalog_and_schema()
        with pytest.raises(AmbiguousLeaf) as exc:
            build_hierarchy(catalog, schema, ["maker"])
        assert len(exc.value.item_ids) >= 2


class TestLoadSite:
    def test_camera_file_round_trips_to_the_fixture(self, camera):
        assert camera.report == []
        shape = {
            e.variable.value: [c.variable.value for c in e.child.edges]
            for e in camera.program.root.edges
        }
        assert shape["Canon"] == ["35mm", "APS"]

    def test_congress_has_four_attributes(self, congress):
        assert [a.name for a in congress.schema.attributes] == [
            "state",
            "party",
            "branch",
            "seat",
        ]
        assert congress.report == []

    def test_empty_pages_rejected(self):
        doc = {
            "site": "x",
            "schema": [{"name": "a", "values": ["v"]}],
            "pages": {"id": "root", "edges": []},
        }
        with pytest.raises(ParseError):
            load_site(doc)

    def test_unknown_top_level_key_rejected(self):
        doc = camera_doc()
        doc["surprise"] = True
        with pytest.raises(ParseError):
            load_site(doc)

    def test_catalog_and_pages_are_mutually_exclusive(self):
        doc = camera_doc()
        doc["pages"] = {"id": "root", "content": "c"}
        with pytest.raises(ParseError):
            load_site(doc)

    def test_missing_schema_rejected(self):
        with pytest.raises(SchemaError):
            load_site({"site": "x", "pages": {"id": "r", "content": "c"}})

    def test_save_then_load_preserves_path_semantics(self, camera, tmp_path):
        out = tmp_path / "camera-roundtrip.site"
        save_site(camera, out)
        again = load_site(out)
        assert again.report == []
        original = {
            (pv.leaf, tuple(sorted(pv.valuation.to_dict().items())))
            for pv in enumerate_paths(camera.program)
        }
        reloaded = {
            (pv.leaf, tuple(sorted(pv.valuation.to_dict().items())))
            for pv in enumerate_paths(again.program)
        }
        assert original == reloaded
        assert again.lexicon == camera.lexicon
        assert len(again.activities) == len(camera.activities)

    def test_congress_save_load_round_trip(self, congress, tmp_path):
        out = tmp_path / "congress-roundtrip.site"
        save_site(congress, out)
        again = load_site(out)
        assert structurally_equal(again.program, congress.program)


class TestSplitCoalesced:
    def test_congress_links_become_single_variable_chains(self, congress):
        # The member links coalesce party, branch, and seat; after loading,
        # every edge carries exactly one variable, in schema order.
        nd = next(
            e.child for e in congress.program.root.edges
            if e.variable == Variable("state", "North Dakota")
        )
        assert {str(e.variable) for e in nd.edges} == {
            "party=Democrat",
            "party=Republican",
        }
        democrat = next(
            e.child for e in nd.edges if e.variable == Variable("party", "Democrat")
        )
        assert [str(e.variable) for e in democrat.edges] == ["branch=senate"]
        senate = democrat.edges[0].child
        assert {str(e.variable) for e in senate.edges} == {
            "seat=senior",
            "seat=junior",
        }

    def test_single_variable_label_unchanged(self, camera):
        raw = RawNode(
            "r",
            (
                RawEdge(
                    (Variable("maker", "Nikon"),),
                    "Nikon",
                    RawNode("leaf", (), "item"),
                ),
            ),
        )
        split = split_coalesced(raw, camera.schema)
        assert split == raw

    def test_duplicate_attribute_in_label_rejected(self, camera):
        raw = RawNode(
            "r",
            (
                RawEdge(
                    (Variable("maker", "Nikon"), Variable("maker", "Canon")),
                    "both",
                    RawNode("leaf", (), "item"),
                ),
            ),
        )
        with pytest.raises(DuplicateAttributeInLabel):
            split_coalesced(raw, camera.schema)

    def test_random_coalesced_fixtures_preserve_flattened_valuations(self):
        from outofturn.ingest import raw_to_program
        from outofturn.model import Attribute, Schema

        rng = random.Random(21)
        for _ in range(30):
            attrs = tuple(
                Attribute(f"a{i}", tuple(f"v{j}" for j in range(3)))
                for i in range(4)
            )
            schema = Schema(attrs)
            edges = []
            used = set()
            for n in range(rng.randint(2, 6)):
                count = rng.randint(1, 3)
                chosen = rng.sample(range(4), count)
                label = tuple(
                    Variable(f"a{i}", f"v{rng.randint(0, 2)}") for i in sorted(chosen)
                )
                if label in used or any(
                    label[: len(other)] == other or other[: len(label)] == label
                    for other in used
                ):
                    continue
                used.add(label)
                edges.append(
                    RawEdge(label, f"link-{n}", RawNode(f"leaf-{n}", (), f"item-{n}"))
                )
            if not edges:
                continue
            raw = RawNode("root", tuple(edges))
            before = raw_path_valuations(raw, schema)
            split = split_coalesced(raw, schema)
            program = raw_to_program(split, schema)
            assert validate_program(program) == []
            after = [
                (pv.leaf, pv.valuation) for pv in enumerate_paths(program)
            ]
            key = lambda pairs: sorted(
                (leaf, tuple(sorted(v.to_dict().items()))) for leaf, v in pairs
            )
            assert key(before) == key(after)


class TestGenerateSynthetic:
    def test_minimal_dimensions(self):
        program = generate_synthetic(1, 1, seed=1)
        root = program.root
        assert isinstance(root, Branch)
        assert len(root.edges) == 1
        assert isinstance(root.edges[0].child, Leaf)

    def test_leaf_count_is_fanout_to_the_depth(self):
        program = generate_synthetic(3, 4, seed=9)
        assert len(enumerate_paths(program)) == 64

    def test_same_seed_same_program(self):
        a = generate_synthetic(4, 3, seed=123)
        b = generate_synthetic(4, 3, seed=123)
        assert structurally_equal(a, b)

    def test_different_seed_differs(self):
        a = generate_synthetic(4, 3, seed=1)
        b = generate_synthetic(4, 3, seed=2)
        assert not structurally_equal(a, b)

    def test_size_guard(self):
        with pytest.raises(SizeLimitExceeded):
            generate_synthetic(7, 10, seed=1)

    def test_specializes_cleanly(self):
        rng = random.Random(77)
        program = generate_synthetic(4, 3, seed=5)
        for _ in range(10):
            assignment = random_consistent_assignment(rng, program)
            result = partial_evaluate(program, assignment)
            if result.program is not None:
                assert validate_program(result.program) == []


class TestBundleSerialization:
    def test_bundle_doc_has_only_known_keys(self, congress):
        doc = bundle_to_doc(congress)
        assert set(doc) <= {
            "site", "title", "schema", "pages", "lexicon",
            "implies", "content", "activities",
        }
        json.dumps(doc)  # must be serializable
