"""Classify which information-seeking activities a program representation serves.

An activity pairs the partial information a user can articulate up front with
a goal predicate over leaves. A representation is personable for the activity
when the goal content stays reachable after specializing on the articulable
information and some genuine choice remains on the way there. It is
unpersonable either because the user's vocabulary has no program variables at
all, or because articulating the activity decides every variable on every
goal path, leaving no interaction.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .errors import InvalidActivity
from .evaluate import partial_evaluate
from .model import (
    Assignment,
    Branch,
    InteractionProgram,
    Leaf,
    PathValuation,
    Variable,
    edge_variables,
    enumerate_paths,
    iter_nodes,
    program_depth,
)

PERSONABLE = "personable"
MISSING_VARIABLES = "unpersonable-missing-variables"
COMPLETE_ONLY = "unpersonable-complete-only"
OUT_OF_SCOPE = "out-of-scope"


@dataclass(frozen=True)
class Goal:
    """Acceptable leaves, by id or by attribute-value constraints.

    Item ids match either a leaf's page id or its content ref. Exactly one of
    the two forms must be given.
    """

    item_ids: Optional[frozenset[str]] = None
    constraints: Optional[tuple[tuple[str, str], ...]] = None

    def __post_init__(self):
        if (self.item_ids is None) == (self.constraints is None):
            raise InvalidActivity("goal needs item ids or constraints, not both")

    @classmethod
    def items(cls, ids) -> "Goal":
        return cls(item_ids=frozenset(ids))

    @classmethod
    def of_constraints(cls, mapping: Mapping[str, str]) -> "Goal":
        return cls(constraints=tuple(sorted(mapping.items())))

    def accepts(self, leaf: Leaf, valuation: Assignment) -> bool:
        if self.item_ids is not None:
            return leaf.page_id in self.item_ids or (
                leaf.content_ref is not None and leaf.content_ref in self.item_ids
            )
        for attr, value in self.constraints or ():
            if valuation.get(Variable(attr, value)) is not True:
                return False
        return True


@dataclass(frozen=True)
class ActivitySpec:
    """A user's information-seeking activity.

    ``meta_choices`` marks the activity as an enquiry about the remaining
    values of an attribute rather than a selection; such requests are routed
    to the session service's choice listing and reported out of scope here.
    """

    name: str
    expressible: Assignment = field(default_factory=Assignment)
    goal: Optional[Goal] = None
    meta_choices: Optional[str] = None


@dataclass(frozen=True)
class Verdict:
    kind: str
    witness: dict
    detail: str = ""


@dataclass(frozen=True)
class FrozenReport:
    frozen: bool
    depth: int
    single_level_edges: tuple[str, ...]


@dataclass(frozen=True)
class AudienceReport:
    rows: tuple[tuple[str, Verdict], ...]
    summary: tuple[tuple[str, int], ...]


def _goal_leaves(program: InteractionProgram, goal: Goal) -> dict[str, PathValuation]:
    found = {}
    leaf_by_id = {
        node.page_id: node for node in iter_nodes(program.root) if isinstance(node, Leaf)
    }
    for path in enumerate_paths(program):
        leaf = leaf_by_id[path.leaf]
        if goal.accepts(leaf, path.valuation):
            found[path.leaf] = path
    return found


def _path_variables(program: InteractionProgram) -> dict[str, frozenset[Variable]]:
    """Leaf page id to the set of unresolved edge variables on its path."""
    out: dict[str, frozenset[Variable]] = {}

    def walk(node, traversed: frozenset[Variable]):
        if isinstance(node, Leaf):
            out[node.page_id] = traversed
            return
        for edge in node.edges:
            nxt = traversed if edge.resolved else traversed | {edge.variable}
            walk(edge.child, nxt)

    walk(program.root, frozenset())
    return out


def _surviving_leaf_ids(result) -> frozenset[str]:
    if result.program is None:
        return frozenset()
    return frozenset(
        n.page_id for n in iter_nodes(result.program.root) if isinstance(n, Leaf)
    )


def _reaches_goal_with_interaction(
    program: InteractionProgram,
    true_vars: frozenset[Variable],
    goal_ids: frozenset[str],
    path_vars: dict[str, frozenset[Variable]],
) -> bool:
    """Does asserting exactly ``true_vars`` narrow to goal content only,
    with at least one goal path variable left undecided?"""
    assignment = Assignment({v: True for v in true_vars}).closed(program.schema)
    result = partial_evaluate(program, assignment)
    surviving = _surviving_leaf_ids(result)
    if not surviving or not surviving <= goal_ids:
        return False
    return any(
        any(not assignment.decides(v) for v in path_vars[leaf]) for leaf in surviving
    )


def assess(program: InteractionProgram, activity: ActivitySpec) -> Verdict:
    """Decide whether the representation is personable for one activity."""
    if activity.meta_choices is not None:
        return Verdict(
            OUT_OF_SCOPE,
            {"attribute": activity.meta_choices},
            "enquiry about available choices; served by the session choice "
            "listing, not by specialization",
        )
    schema = program.schema
    try:
        activity.expressible.check_consistent(schema)
    except Exception as exc:
        raise InvalidActivity(f"activity {activity.name!r}: {exc}") from exc
    if activity.goal is None:
        raise InvalidActivity(f"activity {activity.name!r} has no goal")

    in_use = edge_variables(program.root)
    missing = sorted(
        str(v) for v in activity.expressible.true_variables() if v not in in_use
    )
    if missing:
        return Verdict(
            MISSING_VARIABLES,
            {"missing": missing},
            "no program variables allow these aspects to be expressed",
        )

    # False entries on attributes outside the schema cannot prune anything;
    # drop them so specialization sees only schema variables.
    known = Assignment(
        {v: b for v, b in activity.expressible.items() if schema.has_variable(v)}
    )
    closed = known.closed(schema)
    result = partial_evaluate(program, closed)
    goal_paths = _goal_leaves(program, activity.goal)
    reachable = frozenset(goal_paths) & _surviving_leaf_ids(result)
    if not reachable:
        return Verdict(
            MISSING_VARIABLES,
            {"missing": [], "unreachable_goal": True},
            "no goal content is reachable under the expressible information",
        )

    path_vars = _path_variables(program)
    undecided = {
        leaf: frozenset(v for v in path_vars[leaf] if not closed.decides(v))
        for leaf in reachable
    }
    if any(undecided.values()):
        return Verdict(
            PERSONABLE,
            {"realizing": closed.to_dict()},
            "goal content reachable with interaction remaining",
        )

    # Every reachable goal path is fully decided. Check whether expressing
    # strictly less would still narrow to goal content with a real choice
    # left; if so the activity does not force a complete evaluation.
    goal_ids = frozenset(goal_paths)
    trues = tuple(activity.expressible.true_variables())
    for size in range(len(trues) - 1, -1, -1):
        for subset in itertools.combinations(trues, size):
            if _reaches_goal_with_interaction(
                program, frozenset(subset), goal_ids, path_vars
            ):
                realizing = Assignment({v: True for v in subset}).closed(schema)
                return Verdict(
                    PERSONABLE,
                    {"realizing": realizing.to_dict()},
                    "a smaller articulation realizes the goal with "
                    "interaction remaining",
                )
    witness_leaf = sorted(reachable)[0]
    return Verdict(
        COMPLETE_ONLY,
        {"complete_valuation": goal_paths[witness_leaf].valuation.to_dict(),
         "leaf": witness_leaf},
        "the activity decides every variable on each goal path",
    )


def detect_frozen(program: InteractionProgram) -> FrozenReport:
    """A one-level design admits only complete evaluations."""
    depth = program_depth(program.root)
    edges: tuple[str, ...] = ()
    if isinstance(program.root, Branch):
        edges = tuple(str(e.variable) for e in program.root.edges)
    return FrozenReport(frozen=depth <= 1, depth=depth, single_level_edges=edges)


def audience(
    program: InteractionProgram, activities: list[ActivitySpec]
) -> AudienceReport:
    rows = tuple((a.name, assess(program, a)) for a in activities)
    summary = Counter(v.kind for _, v in rows)
    return AudienceReport(rows=rows, summary=tuple(sorted(summary.items())))
