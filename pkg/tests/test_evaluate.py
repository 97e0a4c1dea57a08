"""Specialization: pruning, splicing, dead ends, and the path-set contract."""

from __future__ import annotations

import random

import pytest

from outofturn.errors import (
    ConflictingSteps,
    InconsistentAssignment,
    NoSuchEdge,
    UnknownVariable,
)
from outofturn.evaluate import (
    COMPLETE,
    EMPTY,
    PARTIAL,
    apply_sequence,
    click,
    partial_evaluate,
)
from outofturn.model import (
    Assignment,
    Branch,
    Edge,
    InteractionProgram,
    Leaf,
    Variable,
    enumerate_paths,
    structurally_equal,
    validate_program,
)

from conftest import (
    as_multiset,
    oracle_paths,
    random_consistent_assignment,
    random_program,
    result_paths,
)

SLR = Assignment.parse({"type=SLR": True, "type=35mm": False, "type=APS": False})


class TestPartialEvaluate:
    def test_slr_specialization_keeps_nikon_and_minolta(self, camera):
        result = partial_evaluate(camera.program, SLR)
        assert result.kind == PARTIAL
        root = result.program.root
        assert isinstance(root, Branch)
        assert [str(e.variable) for e in root.edges] == ["maker=Nikon", "maker=Minolta"]
        # The type level is decided, so each maker edge goes straight to
        # its SLR leaf.
        assert {e.child.content_ref for e in root.edges} == {"nikon-slr", "minolta-slr"}
        assert all(isinstance(e.child, Leaf) for e in root.edges)
        assert "root/maker=Canon" in result.eliminated

    def test_empty_assignment_is_identity(self, camera):
        result = partial_evaluate(camera.program, Assignment())
        assert result.kind == PARTIAL
        assert result.eliminated == frozenset()
        assert structurally_equal(result.program, camera.program)

    def test_unsatisfiable_conjunction_is_empty(self, camera):
        conjunction = Assignment.parse({"maker=Canon": True, "type=SLR": True})
        result = partial_evaluate(camera.program, conjunction)
        assert result.kind == EMPTY
        assert result.program is None

    def test_unknown_variable_is_an_error(self, camera):
        with pytest.raises(UnknownVariable):
            partial_evaluate(
                camera.program, Assignment.parse({"warranty=1-year": True})
            )

    def test_inconsistent_assignment_is_an_error(self, camera):
        with pytest.raises(InconsistentAssignment):
            partial_evaluate(
                camera.program,
                Assignment.parse({"type=SLR": True, "type=APS": True}),
            )

    def test_closure_is_applied_for_the_caller(self, camera):
        bare = partial_evaluate(camera.program, Assignment.parse({"type=SLR": True}))
        closed = partial_evaluate(camera.program, SLR)
        assert structurally_equal(bare.program, closed.program)

    def test_results_stay_canonical(self):
        rng = random.Random(23)
        for _ in range(50):
            program = random_program(rng, mixed_branches=True)
            assignment = random_consistent_assignment(rng, program)
            result = partial_evaluate(program, assignment)
            if result.program is not None:
                report = validate_program(result.program)
                assert report == [], report

    def test_leaf_set_contract_against_oracle(self):
        rng = random.Random(99)
        for _ in range(60):
            program = random_program(
                rng, mixed_branches=True, branch_content=False
            )
            assignment = random_consistent_assignment(rng, program)
            result = partial_evaluate(program, assignment)
            assert as_multiset(result_paths(result, assignment)) == as_multiset(
                oracle_paths(program, assignment)
            )

    def test_leaf_set_contract_with_interior_content(self):
        from conftest import leaf_contract_holds

        rng = random.Random(101)
        for _ in range(60):
            program = random_program(rng, mixed_branches=True)
            assignment = random_consistent_assignment(rng, program)
            result = partial_evaluate(program, assignment)
            assert leaf_contract_holds(program, assignment, result)

    def test_content_bearing_branch_becomes_leaf(self):
        from outofturn.model import Attribute, Schema

        schema = Schema((Attribute("a", ("x", "y")), Attribute("b", ("z",))))
        inner = Branch(
            "section",
            (Edge(Variable("b", "z"), "z", Leaf("lz", "item-z")),),
            content_ref="section-page",
        )
        program = InteractionProgram(
            schema, Branch("root", (Edge(Variable("a", "y"), "y", inner),))
        )
        # Killing b=z removes the section's only edge; its own content keeps
        # the page alive as a leaf.
        result = partial_evaluate(program, Assignment.parse({"b=z": False}))
        assert result.kind == PARTIAL
        [edge] = result.program.root.edges
        assert isinstance(edge.child, Leaf)
        assert edge.child.page_id == "section"
        assert edge.child.content_ref == "section-page"


class TestClick:
    def test_click_nikon_roots_at_type_choices(self, camera):
        result = click(camera.program, "root", Variable("maker", "Nikon"))
        root = result.program.root
        assert root.page_id == "root/maker=Nikon"
        assert [str(e.variable) for e in root.edges] == [
            "type=35mm",
            "type=APS",
            "type=SLR",
        ]

    def test_click_single_edge_branch_completes(self, camera):
        # Drill down to a single-edge frontier first.
        narrowed = partial_evaluate(
            camera.program, Assignment.parse({"maker=Minolta": True, "type=APS": False, "type=35mm": False})
        )
        root = narrowed.program.root
        assert len(root.edges) == 1
        result = click(narrowed.program, root.page_id, root.edges[0].variable)
        assert result.kind == COMPLETE
        assert result.program.root.content_ref == "minolta-slr"

    def test_click_unknown_edge_rejected(self, camera):
        with pytest.raises(NoSuchEdge):
            click(camera.program, "root", Variable("type", "SLR"))
        with pytest.raises(NoSuchEdge):
            click(camera.program, "not-the-root", Variable("maker", "Nikon"))

    def test_click_equals_specialization_oracle(self):
        rng = random.Random(5)
        for _ in range(40):
            program = random_program(rng)
            root = program.root
            if isinstance(root, Leaf):
                continue
            edge = rng.choice(root.edges)
            by_click = click(program, root.page_id, edge.variable)
            by_pe = partial_evaluate(
                program, Assignment({edge.variable: True})
            )
            if by_click.program is None:
                assert by_pe.program is None
            else:
                assert structurally_equal(by_click.program, by_pe.program)
            assert by_click.eliminated == by_pe.eliminated


class TestApplySequence:
    def test_slr_then_nikon_completes(self, camera):
        steps = [SLR, Assignment.parse({"maker=Nikon": True})]
        result = apply_sequence(camera.program, steps)
        assert result.kind == COMPLETE
        assert result.program.root.content_ref == "nikon-slr"

    def test_repeated_empty_steps_are_identity(self, camera):
        result = apply_sequence(camera.program, [Assignment()] * 3)
        assert structurally_equal(result.program, camera.program)
        assert result.eliminated == frozenset()

    def test_sequence_equals_union_oracle(self):
        rng = random.Random(17)
        for _ in range(40):
            program = random_program(rng, mixed_branches=True)
            union = random_consistent_assignment(rng, program)
            items = list(union.items())
            rng.shuffle(items)
            half = len(items) // 2
            a1 = Assignment(dict(items[:half]))
            a2 = Assignment(dict(items[half:]))
            split = apply_sequence(program, [a1, a2])
            direct = partial_evaluate(program, union)
            if direct.program is None:
                assert split.program is None
            else:
                assert structurally_equal(
                    split.program, direct.program, ignore_edge_order=True
                )

    def test_conflicting_steps_rejected(self, camera):
        steps = [
            Assignment.parse({"type=SLR": True}),
            Assignment.parse({"type=SLR": False}),
        ]
        with pytest.raises(ConflictingSteps):
            apply_sequence(camera.program, steps)
        exclusive = [
            Assignment.parse({"type=SLR": True}),
            Assignment.parse({"type=APS": True}),
        ]
        with pytest.raises(ConflictingSteps):
            apply_sequence(camera.program, exclusive)


class TestAlgebraicProperties:
    def test_composition(self):
        rng = random.Random(31)
        for _ in range(50):
            program = random_program(rng, mixed_branches=True)
            union = random_consistent_assignment(rng, program)
            items = list(union.items())
            rng.shuffle(items)
            half = len(items) // 2
            a1 = Assignment(dict(items[:half]))
            a2 = Assignment(dict(items[half:]))
            direct = partial_evaluate(program, union)
            first = partial_evaluate(program, a1)
            if first.program is None:
                assert direct.program is None
                continue
            second = partial_evaluate(first.program, a2)
            if direct.program is None:
                assert second.program is None
            else:
                assert structurally_equal(
                    second.program, direct.program, ignore_edge_order=True
                )

    def test_commutativity_of_leaf_sets(self):
        rng = random.Random(43)
        for _ in range(40):
            program = random_program(rng, mixed_branches=True)
            union = random_consistent_assignment(rng, program)
            items = list(union.items())
            half = len(items) // 2
            a1 = Assignment(dict(items[:half]))
            a2 = Assignment(dict(items[half:]))
            forward = apply_sequence(program, [a1, a2])
            backward = apply_sequence(program, [a2, a1])
            assert as_multiset(result_paths(forward)) == as_multiset(
                result_paths(backward)
            )

    def test_idempotence(self):
        rng = random.Random(59)
        for _ in range(40):
            program = random_program(rng, mixed_branches=True)
            assignment = random_consistent_assignment(rng, program)
            once = partial_evaluate(program, assignment)
            if once.program is None:
                continue
            twice = partial_evaluate(once.program, assignment)
            assert twice.program is not None
            assert structurally_equal(once.program, twice.program)

    def test_eliminated_grows_and_leaf_count_shrinks_along_sequence(self):
        rng = random.Random(61)
        for _ in range(30):
            program = random_program(rng)
            union = random_consistent_assignment(rng, program)
            items = list(union.items())
            steps = [Assignment({v: b}) for v, b in items]
            current = program
            eliminated: set[str] = set()
            leaf_count = len(enumerate_paths(program))
            for step in steps:
                result = partial_evaluate(current, step)
                if result.program is None:
                    break
                new_leaves = len(enumerate_paths(result.program))
                assert new_leaves <= leaf_count
                leaf_count = new_leaves
                assert eliminated <= (
                    eliminated | set(result.eliminated)
                )
                eliminated |= set(result.eliminated)
                current = result.program
