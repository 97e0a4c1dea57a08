"""The personalization operator: specialize a program against an assignment.

``partial_evaluate`` deletes every edge decided false, marks or splices edges
decided true, and prunes dead ends, returning a canonical program. Clicking a
hyperlink and supplying information out of turn are both expressed through
it; the two only differ in when the information arrives.

Correctness contract (checked by the test suite against the brute-force path
oracle): the paths of the result are exactly the paths of the input whose
valuations are consistent with the assignment, with each surviving valuation
restricted to the variables the assignment leaves undecided.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import ConflictingSteps, InconsistentAssignment, NoSuchEdge
from .model import (
    Assignment,
    Branch,
    Edge,
    InteractionProgram,
    Leaf,
    Node,
    Variable,
    program_pages,
)

PARTIAL = "partial"
COMPLETE = "complete"
EMPTY = "empty"


@dataclass(frozen=True)
class SpecializationResult:
    """Outcome of one specialization.

    ``kind`` is ``complete`` when the program collapsed to a single leaf
    (nothing left to ask), ``empty`` when no content is consistent with the
    assignment (``program`` is None in that case), and ``partial`` otherwise.
    ``eliminated`` lists the page ids present before but not after.
    """

    program: Optional[InteractionProgram]
    kind: str
    eliminated: frozenset[str]

    @property
    def is_empty(self) -> bool:
        return self.kind == EMPTY


def _kind_of(root: Optional[Node]) -> str:
    if root is None:
        return EMPTY
    return COMPLETE if isinstance(root, Leaf) else PARTIAL


def _specialize(node: Node, assignment: Assignment) -> Optional[Node]:
    """Returns the specialized subtree, or None when it is a dead end."""
    if isinstance(node, Leaf):
        return node
    kept: list[Edge] = []
    unchanged = True
    for edge in node.edges:
        decided = True if edge.resolved else assignment.get(edge.variable)
        if decided is False:
            unchanged = False
            continue
        child = _specialize(edge.child, assignment)
        if child is None:
            unchanged = False
            continue
        if decided is True and not edge.resolved:
            kept.append(Edge(edge.variable, edge.anchor, child, resolved=True))
            unchanged = False
        elif child is edge.child:
            kept.append(edge)
        else:
            kept.append(Edge(edge.variable, edge.anchor, child, resolved=edge.resolved))
            unchanged = False
    if not kept:
        # Dead end unless the page has content of its own to stand on.
        if node.content_ref is not None:
            return Leaf(node.page_id, node.content_ref)
        return None
    if len(kept) == 1 and kept[0].resolved:
        # The sole surviving edge is already decided: splice the child in.
        return kept[0].child
    if unchanged and len(kept) == len(node.edges):
        return node
    return Branch(node.page_id, tuple(kept), node.content_ref)


def partial_evaluate(program: InteractionProgram, assignment: Assignment) -> SpecializationResult:
    """Specialize ``program`` with respect to ``assignment``.

    The assignment is closed under exclusivity before use, so passing
    ``{type=SLR: true}`` on an exclusive attribute also rules out the
    conflicting values. Raises UnknownVariable for variables outside the
    schema (that is the signal callers use to detect inexpressible requests)
    and InconsistentAssignment for self-conflicting input.
    """
    schema = program.schema
    for var in assignment:
        schema.require_variable(var)
    closed = assignment.closed(schema)
    root = _specialize(program.root, closed)
    before = program_pages(program.root)
    if root is None:
        return SpecializationResult(None, EMPTY, before)
    after = program_pages(root)
    result_program = (
        program if root is program.root else InteractionProgram(schema, root)
    )
    return SpecializationResult(result_program, _kind_of(root), before - after)


def click(program: InteractionProgram, page_id: str, variable: Variable) -> SpecializationResult:
    """Follow a hyperlink on the current root page.

    Clicking asserts the edge's variable true (with exclusivity closure) and
    specializes, which roots the result at the chosen subtree whenever the
    siblings share the clicked attribute.
    """
    root = program.root
    if not isinstance(root, Branch) or root.page_id != page_id:
        raise NoSuchEdge(f"page {page_id!r} is not the current choice page")
    if all(edge.variable != variable for edge in root.edges):
        raise NoSuchEdge(f"page {page_id!r} has no edge labeled {variable}")
    return partial_evaluate(program, Assignment({variable: True}))


def apply_sequence(
    program: InteractionProgram, steps: Iterable[Assignment]
) -> SpecializationResult:
    """Fold a sequence of specializations over the program.

    Equivalent to one specialization against the union of the steps;
    conflicting steps are rejected up front.
    """
    steps = list(steps)
    union = Assignment()
    try:
        for step in steps:
            union = union.union(step)
        union.closed(program.schema)
    except InconsistentAssignment as exc:
        raise ConflictingSteps(f"steps conflict: {exc.message}") from exc

    current = program
    for step in steps:
        result = partial_evaluate(current, step)
        if result.is_empty:
            return SpecializationResult(
                None, EMPTY, program_pages(program.root)
            )
        current = result.program
    before = program_pages(program.root)
    after = program_pages(current.root)
    return SpecializationResult(current, _kind_of(current.root), before - after)
