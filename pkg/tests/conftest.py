"""Shared fixtures: bundled sites, random program generators, and the
path-enumeration oracle used to check specialization."""

from __future__ import annotations

import importlib.resources as resources
import random

import pytest

from outofturn.evaluate import SpecializationResult
from outofturn.ingest import SiteBundle, load_site
from outofturn.model import (
    Assignment,
    Attribute,
    Branch,
    Edge,
    InteractionProgram,
    Leaf,
    Schema,
    Variable,
    enumerate_paths,
)

DATA = resources.files("outofturn") / "data"


def pytest_runtest_logreport(report):
    # One visible pass/fail line per acceptance criterion.
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    outcome = "PASS" if report.passed else "FAIL"
    print(f"\nacceptance {outcome}: {name}")


def load_bundled(name: str) -> SiteBundle:
    with resources.as_file(DATA / name) as path:
        return load_site(path)


@pytest.fixture(scope="session")
def camera() -> SiteBundle:
    return load_bundled("camera.site")


@pytest.fixture(scope="session")
def congress() -> SiteBundle:
    return load_bundled("congress.site")


@pytest.fixture(scope="session")
def bookstore() -> SiteBundle:
    return load_bundled("bookstore.site")


def camera_doc() -> dict:
    import json

    return json.loads((DATA / "camera.site").read_text(encoding="utf-8"))


# Random program generation ----------------------------------------------------

def random_program(
    rng: random.Random,
    max_depth: int = 5,
    max_fanout: int = 4,
    mixed_branches: bool = False,
    n_attributes: int | None = None,
    branch_content: bool = True,
) -> InteractionProgram:
    """An irregular random hierarchy.

    Every branch draws its edges from one attribute (or two when
    ``mixed_branches``), attributes are never reused along a path, and, when
    ``branch_content`` allows, some branches carry content of their own.
    """
    n_attrs = n_attributes or max_depth + (1 if mixed_branches else 0)
    attributes = tuple(
        Attribute(
            f"a{i}",
            tuple(f"v{j}" for j in range(rng.randint(2, max_fanout + 1))),
            exclusive=True,
        )
        for i in range(n_attrs)
    )
    schema = Schema(attributes)
    counter = [0]

    def next_id(prefix: str) -> str:
        counter[0] += 1
        return f"{prefix}{counter[0]}"

    def build(depth: int, available: list[Attribute]) -> tuple:
        page_id = next_id("p")
        if depth >= max_depth or not available or rng.random() < 0.25 * depth:
            return Leaf(page_id, f"item-{page_id}")
        picks = [rng.choice(available)]
        if mixed_branches and len(available) > 1 and rng.random() < 0.4:
            other = rng.choice([a for a in available if a is not picks[0]])
            picks.append(other)
        edges = []
        for attr in picks:
            remaining = [a for a in available if a.name != attr.name]
            values = rng.sample(attr.values, rng.randint(1, len(attr.values)))
            for value in sorted(values, key=attr.values.index):
                child = build(depth + 1, remaining)
                edges.append(Edge(Variable(attr.name, value), value, child))
        content = f"page-{page_id}" if branch_content and rng.random() < 0.2 else None
        return Branch(page_id, tuple(edges), content)

    root = build(0, list(attributes))
    if isinstance(root, Leaf):
        # Guarantee at least one choice so the program is interesting.
        attr = attributes[0]
        edges = tuple(
            Edge(Variable(attr.name, v), v, Leaf(next_id("p"), f"item-{v}"))
            for v in attr.values[:2]
        )
        root = Branch(next_id("p"), edges)
    return InteractionProgram(schema, root)


def random_consistent_assignment(
    rng: random.Random, program: InteractionProgram, density: float = 0.5
) -> Assignment:
    """A random assignment consistent on its face: per chosen exclusive
    attribute either one value is picked true (with closure applied later)
    or some values are set false."""
    entries: dict[Variable, bool] = {}
    for attr in program.schema.attributes:
        if rng.random() > density:
            continue
        if rng.random() < 0.6:
            value = rng.choice(attr.values)
            entries[Variable(attr.name, value)] = True
        else:
            for value in rng.sample(attr.values, rng.randint(1, len(attr.values) - 1) if len(attr.values) > 1 else 1):
                entries[Variable(attr.name, value)] = False
    return Assignment(entries)


def oracle_paths(program: InteractionProgram, assignment: Assignment):
    """Expected result paths: filter the input's paths by consistency with
    the closed assignment, restrict valuations to undecided variables."""
    closed = assignment.closed(program.schema)
    expected = []
    for pv in enumerate_paths(program):
        if pv.valuation.consistent_with(closed):
            restricted = pv.valuation.undecided_in(closed)
            expected.append((pv.leaf, tuple(sorted(restricted.to_dict().items()))))
    return expected


def result_paths(result: SpecializationResult, restricted_by: Assignment | None = None):
    """Paths of a specialization result.

    ``restricted_by`` drops the entries an assignment already decided, so
    closure facts re-derived inside the result compare equal to the
    restriction of the original paths (the variables asserted by surviving
    edges are identical either way).
    """
    if result.program is None:
        return []
    closed = (
        restricted_by.closed(result.program.schema)
        if restricted_by is not None
        else Assignment()
    )
    return [
        (pv.leaf, tuple(sorted(pv.valuation.undecided_in(closed).to_dict().items())))
        for pv in enumerate_paths(result.program)
    ]


def as_multiset(pairs):
    from collections import Counter

    return Counter(pairs)


def interior_content_paths(program: InteractionProgram) -> dict[str, Assignment]:
    """Valuation at every content-bearing branch.

    When all of such a page's edges die under specialization, the page
    survives as a leaf; the leaf-filter oracle alone cannot predict those.
    """
    out: dict[str, Assignment] = {}

    def walk(node, traversed: tuple[Variable, ...]) -> None:
        if isinstance(node, Leaf):
            return
        if node.content_ref is not None:
            entries = Assignment({v: True for v in traversed}).closed(program.schema)
            out[node.page_id] = entries
        for edge in node.edges:
            gained = traversed if edge.resolved else traversed + (edge.variable,)
            walk(edge.child, gained)

    walk(program.root, ())
    return out


def leaf_contract_holds(program, assignment, result) -> bool:
    """The specialization contract, allowing for materialized content pages."""
    closed = assignment.closed(program.schema)
    want = as_multiset(oracle_paths(program, assignment))
    got = as_multiset(result_paths(result, assignment))
    if got == want:
        return True
    if not (want <= got):
        return False
    interior = interior_content_paths(program)
    for (page, valuation), count in (got - want).items():
        if count != 1 or page not in interior:
            return False
        prefix = interior[page]
        if not prefix.consistent_with(closed):
            return False
        restricted = tuple(sorted(prefix.undecided_in(closed).to_dict().items()))
        if restricted != valuation:
            return False
    return True
