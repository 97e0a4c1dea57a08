"""Derive interaction templates from explained traces.

A domain theory explains why a recorded interaction succeeded: backward
chaining from the top goal produces an explanation tree whose leaves are the
observed events. Drawing a frontier through that tree picks an operationality
level: leaves on the frontier are baked into a template (the system supplies
them next time), interior frontier nodes stay as the user's obligations.
Lowering the frontier bakes more and asks less, at the price of fitting fewer
future interactions; scoring templates over a trace corpus quantifies that
trade-off.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from .errors import NoProof, ScopeViolation, TheoryError
from .evaluate import SpecializationResult, partial_evaluate
from .model import Assignment, InteractionProgram, Variable

GLOBAL = "global"
PER_USER = "per-user"

CLICK = "click"
OUT_OF_TURN = "out-of-turn"
FORM_FILL = "form-fill"

_BROWSE_KINDS = (CLICK, OUT_OF_TURN)

_LITERAL_RE = re.compile(r"^\s*([a-zA-Z_][\w-]*)\s*\(\s*(.*?)\s*\)\s*$")


@dataclass(frozen=True, order=True)
class Literal:
    """A predicate over interaction facts, e.g. selected(genre,*).

    ``*`` matches any value. ``achieved(x)`` literals are subgoals proved by
    rules; ``selected(attribute, value)`` matches browse events and
    ``provided(slot, value)`` matches form fills.
    """

    predicate: str
    args: tuple[str, ...]

    @classmethod
    def parse(cls, text: str) -> "Literal":
        match = _LITERAL_RE.match(text)
        if not match:
            raise TheoryError(f"cannot parse literal {text!r}")
        predicate, inner = match.groups()
        args = tuple(a.strip() for a in inner.split(",")) if inner else ()
        if any(not a for a in args):
            raise TheoryError(f"literal {text!r} has an empty argument")
        return cls(predicate, args)

    def subsumes(self, other: "Literal") -> bool:
        if self.predicate != other.predicate or len(self.args) != len(other.args):
            return False
        return all(a in ("*", b) for a, b in zip(self.args, other.args))

    def __str__(self) -> str:
        return f"{self.predicate}({','.join(self.args)})"


@dataclass(frozen=True)
class TheoryRule:
    name: str
    consequent: Literal
    antecedents: tuple[Literal, ...]


@dataclass(frozen=True)
class SlotMeta:
    user_specific: bool = False
    rememberable: bool = False


@dataclass(frozen=True)
class DomainTheory:
    """A handcrafted rule base for explaining interactions at one site."""

    name: str
    goal: Literal
    rules: tuple[TheoryRule, ...]
    slots: tuple[tuple[str, SlotMeta], ...] = ()

    def slot_meta(self, slot: str) -> SlotMeta:
        for name, meta in self.slots:
            if name == slot:
                return meta
        return SlotMeta()

    def rememberable_slots(self) -> tuple[str, ...]:
        return tuple(name for name, meta in self.slots if meta.rememberable)

    @classmethod
    def from_doc(cls, doc: Mapping) -> "DomainTheory":
        if "rules" not in doc:
            raise TheoryError("theory needs a rules list")
        goal_name = str(doc.get("goal", "successful_interaction"))
        goal = Literal("achieved", (goal_name,))
        rules = []
        names = set()
        for i, entry in enumerate(doc["rules"]):
            name = str(entry.get("name") or f"rule-{i}")
            if name in names:
                raise TheoryError(f"duplicate rule name {name!r}")
            names.add(name)
            rules.append(
                TheoryRule(
                    name=name,
                    consequent=Literal.parse(entry["consequent"]),
                    antecedents=tuple(
                        Literal.parse(a) for a in entry.get("antecedents", [])
                    ),
                )
            )
        slots = tuple(
            (
                str(slot),
                SlotMeta(
                    user_specific=bool(meta.get("user_specific", False)),
                    rememberable=bool(meta.get("rememberable", False)),
                ),
            )
            for slot, meta in doc.get("slots", {}).items()
        )
        theory = cls(
            name=str(doc.get("theory", "theory")),
            goal=goal,
            rules=tuple(rules),
            slots=slots,
        )
        theory._check()
        return theory

    @classmethod
    def load(cls, path: Union[str, Path]) -> "DomainTheory":
        return cls.from_doc(json.loads(Path(path).read_text(encoding="utf-8")))

    def _check(self) -> None:
        top = [r for r in self.rules if r.consequent == self.goal]
        if len(top) != 1:
            raise TheoryError(
                f"theory needs exactly one rule concluding {self.goal}, found {len(top)}"
            )
        # The rule graph (consequent -> rules proving an antecedent) must be
        # acyclic so backward chaining terminates.
        graph: dict[str, set[str]] = {}
        for rule in self.rules:
            deps = set()
            for ant in rule.antecedents:
                for other in self.rules:
                    if ant.subsumes(other.consequent) or other.consequent.subsumes(ant):
                        deps.add(other.name)
            graph[rule.name] = deps
        state: dict[str, int] = {}

        def visit(node: str) -> None:
            state[node] = 1
            for nxt in graph[node]:
                mark = state.get(nxt, 0)
                if mark == 1:
                    raise TheoryError(f"rule cycle through {node!r} and {nxt!r}")
                if mark == 0:
                    visit(nxt)
            state[node] = 2

        for rule in self.rules:
            if state.get(rule.name, 0) == 0:
                visit(rule.name)


@dataclass(frozen=True)
class TraceEvent:
    kind: str  # click | out-of-turn | form-fill
    name: str  # attribute (browse) or slot (form-fill)
    value: str
    timestamp: float = 0.0

    def as_literal(self) -> Literal:
        predicate = "provided" if self.kind == FORM_FILL else "selected"
        return Literal(predicate, (self.name, self.value))

    def to_doc(self) -> dict:
        return {
            "kind": self.kind,
            "variable": self.name,
            "value": self.value,
            "timestamp": self.timestamp,
        }


@dataclass(frozen=True)
class Trace:
    trace_id: str
    user_id: Optional[str]
    events: tuple[TraceEvent, ...]

    def browse_variables(self) -> tuple[Variable, ...]:
        return tuple(
            Variable(e.name, e.value) for e in self.events if e.kind in _BROWSE_KINDS
        )


def load_traces(path: Union[str, Path]) -> list[Trace]:
    """Read a trace log: one JSON event per line, grouped by trace id."""
    grouped: dict[str, dict] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TheoryError(f"{path}:{lineno}: invalid trace line: {exc.msg}") from exc
        trace_id = str(doc.get("trace", "trace-0"))
        entry = grouped.setdefault(
            trace_id, {"user": doc.get("user"), "events": []}
        )
        entry["events"].append(
            TraceEvent(
                kind=str(doc["kind"]),
                name=str(doc["variable"]),
                value=str(doc["value"]),
                timestamp=float(doc.get("timestamp", len(entry["events"]))),
            )
        )
    return [
        Trace(trace_id, entry["user"], tuple(entry["events"]))
        for trace_id, entry in grouped.items()
    ]


def save_traces(traces: Iterable[Trace], path: Union[str, Path]) -> None:
    lines = []
    for trace in traces:
        for event in trace.events:
            doc = {"trace": trace.trace_id, "user": trace.user_id}
            doc.update(event.to_doc())
            lines.append(json.dumps(doc))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def validate_trace(trace: Trace, schema=None, theory: Optional[DomainTheory] = None) -> list[str]:
    """Browse events must name schema variables, form fills declared slots."""
    problems = []
    declared = {name for name, _ in theory.slots} if theory is not None else set()
    for event in trace.events:
        if event.kind == FORM_FILL:
            if theory is not None and event.name not in declared:
                problems.append(
                    f"{trace.trace_id}: form-fill references undeclared slot {event.name!r}"
                )
        elif event.kind in _BROWSE_KINDS:
            if schema is not None and not schema.has_variable(
                Variable(event.name, event.value)
            ):
                problems.append(
                    f"{trace.trace_id}: {event.kind} references unknown variable "
                    f"{event.name}={event.value}"
                )
        else:
            problems.append(f"{trace.trace_id}: unknown event kind {event.kind!r}")
    return problems


@dataclass(frozen=True)
class ProofNode:
    """One node of an explanation tree.

    Interior nodes record the rule application that proved their literal;
    leaves record the trace event that matched it. ``node_id`` encodes the
    position in the tree and is what cuts refer to.
    """

    node_id: str
    literal: Literal
    rule: Optional[str] = None
    children: tuple["ProofNode", ...] = ()
    event: Optional[TraceEvent] = None
    ambiguous: bool = False

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def label(self) -> str:
        if self.literal.predicate == "achieved":
            return self.literal.args[0]
        return str(self.literal)


@dataclass(frozen=True)
class ExplanationTree:
    root: ProofNode
    theory: DomainTheory
    trace: Trace
    unmatched_events: tuple[TraceEvent, ...] = ()

    def nodes(self) -> list[ProofNode]:
        out = []

        def walk(node: ProofNode) -> None:
            out.append(node)
            for child in node.children:
                walk(child)

        walk(self.root)
        return out

    def node(self, node_id: str) -> ProofNode:
        for node in self.nodes():
            if node.node_id == node_id:
                return node
        raise KeyError(node_id)

    def find(self, label: str) -> ProofNode:
        for node in self.nodes():
            if node.label == label:
                return node
        raise KeyError(label)

    def leaf_ids(self) -> frozenset[str]:
        return frozenset(n.node_id for n in self.nodes() if n.is_leaf)


def explain(trace: Trace, theory: DomainTheory) -> ExplanationTree:
    """Prove that a trace achieved the theory's top goal.

    Ordered backward chaining: the first rule whose consequent matches is
    used, and each event literal consumes the earliest unused matching
    event. When several rules or events match, the choice is recorded as
    ambiguous rather than explored. NoProof lists every antecedent that
    could not be satisfied.
    """
    used: set[int] = set()
    failures: list[str] = []

    def prove(goal: Literal, node_id: str) -> Optional[ProofNode]:
        matching = [r for r in theory.rules if r.consequent.subsumes(goal) or goal.subsumes(r.consequent)]
        if matching:
            rule = matching[0]
            children = []
            ok = True
            for i, antecedent in enumerate(rule.antecedents):
                child = prove(antecedent, f"{node_id}.{i}")
                if child is None:
                    ok = False
                else:
                    children.append(child)
            if not ok:
                return None
            ground = goal if "*" not in goal.args else rule.consequent
            return ProofNode(
                node_id=node_id,
                literal=ground,
                rule=rule.name,
                children=tuple(children),
                ambiguous=len(matching) > 1,
            )
        candidates = [
            (i, e)
            for i, e in enumerate(trace.events)
            if i not in used and goal.subsumes(e.as_literal())
        ]
        if not candidates:
            failures.append(str(goal))
            return None
        index, event = candidates[0]
        used.add(index)
        return ProofNode(
            node_id=node_id,
            literal=event.as_literal(),
            event=event,
            ambiguous=len(candidates) > 1,
        )

    root = prove(theory.goal, "n0")
    if root is None:
        raise NoProof(
            f"trace {trace.trace_id!r} does not satisfy {theory.goal}",
            unsatisfied=sorted(set(failures)),
        )
    unmatched = tuple(e for i, e in enumerate(trace.events) if i not in used)
    return ExplanationTree(root=root, theory=theory, trace=trace, unmatched_events=unmatched)


@dataclass(frozen=True)
class Cut:
    """An operationality choice: an antichain frontier covering every path."""

    frontier: frozenset[str]

    def __len__(self) -> int:
        return len(self.frontier)


def root_cut(tree: ExplanationTree) -> Cut:
    return Cut(frozenset({tree.root.node_id}))


def leaf_cut(tree: ExplanationTree) -> Cut:
    return Cut(tree.leaf_ids())


def is_frontier(tree: ExplanationTree, node_ids: frozenset[str]) -> bool:
    """Every root-to-leaf path must cross the set exactly once."""

    def check(node: ProofNode, crossed: int) -> bool:
        crossed += 1 if node.node_id in node_ids else 0
        if crossed > 1:
            return False
        if node.is_leaf:
            return crossed == 1
        return all(check(child, crossed) for child in node.children)

    return check(tree.root, 0)


def enumerate_cuts(tree: ExplanationTree, max_frontier: Optional[int] = None) -> list[Cut]:
    """All frontiers through the tree, smallest first.

    ``max_frontier`` bounds the frontier size, except that the root-level
    and leaf-level cuts are always included.
    """

    def frontiers(node: ProofNode) -> list[frozenset[str]]:
        own = [frozenset({node.node_id})]
        if node.is_leaf:
            return own
        combined: list[frozenset[str]] = [frozenset()]
        for child in node.children:
            combined = [
                acc | f for acc in combined for f in frontiers(child)
            ]
        return own + combined

    all_cuts = {f for f in frontiers(tree.root)}
    if max_frontier is not None:
        keep = {f for f in all_cuts if len(f) <= max_frontier}
        keep.add(root_cut(tree).frontier)
        keep.add(leaf_cut(tree).frontier)
        all_cuts = keep
    ordered = sorted(all_cuts, key=lambda f: (len(f), tuple(sorted(f))))
    return [Cut(f) for f in ordered]


def refines(tree: ExplanationTree, lower: Cut, upper: Cut) -> bool:
    """True when ``lower`` sits at or below ``upper`` on every branch."""
    ancestors: dict[str, set[str]] = {}

    def walk(node: ProofNode, above: set[str]) -> None:
        ancestors[node.node_id] = above | {node.node_id}
        for child in node.children:
            walk(child, ancestors[node.node_id])

    walk(tree.root, set())
    return all(bool(ancestors[n] & upper.frontier) for n in lower.frontier)


@dataclass(frozen=True)
class Template:
    """A pre-specialized interaction.

    ``baked_assignment`` holds browse variables the template decides up
    front; ``baked_slots`` holds remembered form values. ``free`` names the
    obligations the user still completes. The entry program is the base
    program specialized against the baked browse variables.
    """

    name: str
    scope: str  # global | per-user
    user_id: Optional[str]
    baked_assignment: Assignment
    baked_slots: tuple[tuple[str, str], ...]
    free: tuple[str, ...]
    entry: Optional[SpecializationResult] = None

    @property
    def is_vanilla(self) -> bool:
        return self.baked_assignment.is_empty() and not self.baked_slots

    def baked_slot_map(self) -> dict[str, str]:
        return dict(self.baked_slots)


def operationalize(
    tree: ExplanationTree,
    cut: Cut,
    scope: str,
    user_id: Optional[str] = None,
    program: Optional[InteractionProgram] = None,
    name: Optional[str] = None,
) -> Template:
    """Turn a frontier through an explanation tree into a template.

    Frontier leaves are baked: browse selections become the template's
    assignment, form fills become remembered slot values. Interior frontier
    nodes remain free obligations. A global template must not bake
    user-specific slots; those do not transport across users.
    """
    if scope not in (GLOBAL, PER_USER):
        raise ScopeViolation(f"unknown scope {scope!r}")
    if scope == PER_USER and not user_id:
        raise ScopeViolation("per-user templates need a user id")
    if not is_frontier(tree, cut.frontier):
        raise TheoryError("cut is not a frontier through the explanation tree")

    baked_vars: dict[Variable, bool] = {}
    baked_slots: list[tuple[str, str]] = []
    free: list[str] = []
    for node in tree.nodes():
        if node.node_id not in cut.frontier:
            continue
        if node.is_leaf and node.event is not None:
            if node.event.kind == FORM_FILL:
                meta = tree.theory.slot_meta(node.event.name)
                if scope == GLOBAL and meta.user_specific:
                    raise ScopeViolation(
                        f"slot {node.event.name!r} is user-specific and cannot "
                        "be baked into a global template"
                    )
                baked_slots.append((node.event.name, node.event.value))
            else:
                baked_vars[Variable(node.event.name, node.event.value)] = True
        else:
            free.append(node.label)

    assignment = Assignment(baked_vars)
    entry = None
    if program is not None:
        entry = partial_evaluate(program, assignment)
    if name is None:
        baked_names = sorted(
            [str(v) for v in assignment.true_variables()]
            + [slot for slot, _ in baked_slots]
        )
        name = "vanilla" if not baked_names else "baked:" + "+".join(baked_names)
        if scope == PER_USER:
            name = f"{user_id}:{name}"
    return Template(
        name=name,
        scope=scope,
        user_id=user_id if scope == PER_USER else None,
        baked_assignment=assignment,
        baked_slots=tuple(sorted(baked_slots)),
        free=tuple(free),
        entry=entry,
    )


def template_consistent(template: Template, trace: Trace) -> bool:
    """No event of the trace contradicts a baked value."""
    slots = template.baked_slot_map()
    for event in trace.events:
        if event.kind == FORM_FILL:
            baked = slots.get(event.name)
            if baked is not None and baked != event.value:
                return False
        else:
            var = Variable(event.name, event.value)
            for baked_var in template.baked_assignment.true_variables():
                if baked_var.attribute == event.name and baked_var != var:
                    return False
    return True


def subsumed_events(template: Template, trace: Trace) -> int:
    """Events the user would not need to repeat under this template."""
    slots = template.baked_slot_map()
    count = 0
    for event in trace.events:
        if event.kind == FORM_FILL:
            if slots.get(event.name) == event.value:
                count += 1
        elif template.baked_assignment.get(Variable(event.name, event.value)) is True:
            count += 1
    return count


@dataclass(frozen=True)
class ScoreRow:
    template: Template
    applicable: int
    coverage: float
    savings: float

    @property
    def utility(self) -> float:
        return self.coverage * self.savings


def score_templates(
    templates: Sequence[Template],
    corpus: Sequence[Trace],
    top_k: int = 5,
) -> list[ScoreRow]:
    """Score templates over a corpus and keep the best few.

    Coverage is the fraction of applicable traces (all traces for a global
    template, the owner's traces for a per-user one) whose events are
    consistent with the baked values; savings is the mean number of events
    subsumed over those consistent traces. The returned table is sorted by
    coverage times savings and capped at ``top_k`` rows, except that a
    vanilla template is always retained.
    """
    rows = []
    for template in templates:
        applicable = [
            t
            for t in corpus
            if template.scope == GLOBAL or t.user_id == template.user_id
        ]
        consistent = [t for t in applicable if template_consistent(template, t)]
        coverage = len(consistent) / len(applicable) if applicable else 0.0
        savings = (
            sum(subsumed_events(template, t) for t in consistent) / len(consistent)
            if consistent
            else 0.0
        )
        rows.append(
            ScoreRow(
                template=template,
                applicable=len(applicable),
                coverage=coverage,
                savings=savings,
            )
        )
    rows.sort(key=lambda r: (-r.utility, -r.coverage, r.template.name))
    kept = rows[: max(top_k, 0)]
    if not any(r.template.is_vanilla for r in kept):
        vanilla = [r for r in rows if r.template.is_vanilla]
        if vanilla:
            kept.append(vanilla[0])
    return kept


def derive_templates(
    theory: DomainTheory,
    traces: Sequence[Trace],
    program: Optional[InteractionProgram] = None,
    max_frontier: Optional[int] = None,
    top_k: int = 5,
) -> list[ScoreRow]:
    """Full pipeline: explain each trace, enumerate cuts, emit and score.

    Cuts that bake user-specific slots become per-user templates for the
    trace's user; all others are global. Duplicate templates (same scope,
    owner, and baked values) collapse. The vanilla template is always part
    of the result.
    """
    pool: dict[tuple, Template] = {}
    for trace in traces:
        tree = explain(trace, theory)
        for cut in enumerate_cuts(tree, max_frontier):
            slots_in_cut = [
                node.event.name
                for node in tree.nodes()
                if node.node_id in cut.frontier
                and node.is_leaf
                and node.event is not None
                and node.event.kind == FORM_FILL
            ]
            user_specific = any(
                theory.slot_meta(slot).user_specific for slot in slots_in_cut
            )
            scope = PER_USER if user_specific else GLOBAL
            user = trace.user_id if user_specific else None
            if scope == PER_USER and not user:
                continue
            template = operationalize(
                tree, cut, scope, user_id=user, program=program
            )
            key = (
                template.scope,
                template.user_id,
                tuple(sorted(str(v) for v in template.baked_assignment.true_variables())),
                template.baked_slots,
            )
            pool.setdefault(key, template)
    return score_templates(list(pool.values()), list(traces), top_k=top_k)


@dataclass(frozen=True)
class UserMemory:
    """Per-user remembered slot values, the simplest personalization tier."""

    user_id: str
    observations: tuple[tuple[str, str], ...] = ()

    def current(self, rememberable: Sequence[str], threshold: int = 1) -> dict[str, str]:
        """Most recent value per slot among values seen at least ``threshold``
        times, restricted to the rememberable slots."""
        out: dict[str, str] = {}
        for slot in rememberable:
            counts: dict[str, int] = {}
            latest_qualified: Optional[str] = None
            for name, value in self.observations:
                if name != slot:
                    continue
                counts[value] = counts.get(value, 0) + 1
                if counts[value] >= threshold:
                    latest_qualified = value
            if latest_qualified is not None:
                out[slot] = latest_qualified
        return out


def remember(
    memory: Optional[UserMemory],
    trace: Trace,
    theory: DomainTheory,
) -> UserMemory:
    """Fold one trace's rememberable form fills into a user's memory."""
    if trace.user_id is None:
        raise TheoryError("cannot remember a trace without a user id")
    if memory is not None and memory.user_id != trace.user_id:
        raise TheoryError("memory and trace belong to different users")
    rememberable = set(theory.rememberable_slots())
    observed = tuple(
        (e.name, e.value)
        for e in trace.events
        if e.kind == FORM_FILL and e.name in rememberable
    )
    base = memory.observations if memory is not None else ()
    return UserMemory(trace.user_id, base + observed)


def memory_template(
    memory: UserMemory,
    theory: DomainTheory,
    threshold: int = 1,
    program: Optional[InteractionProgram] = None,
) -> Template:
    """The stored per-user template: leaf-level operationality restricted to
    the theory's rememberable slots."""
    slots = memory.current(theory.rememberable_slots(), threshold)
    entry = partial_evaluate(program, Assignment()) if program is not None else None
    return Template(
        name=f"{memory.user_id}:remembered",
        scope=PER_USER,
        user_id=memory.user_id,
        baked_assignment=Assignment(),
        baked_slots=tuple(sorted(slots.items())),
        free=(theory.goal.args[0],),
        entry=entry,
    )


# Durable form ----------------------------------------------------------------

def template_to_doc(template: Template) -> dict:
    doc = {
        "name": template.name,
        "scope": template.scope,
        "user": template.user_id,
        "baked": template.baked_assignment.to_dict(),
        "baked_slots": dict(template.baked_slots),
        "free": list(template.free),
    }
    return doc


def template_from_doc(
    doc: Mapping, program: Optional[InteractionProgram] = None
) -> Template:
    assignment = Assignment.parse(doc.get("baked", {}))
    entry = partial_evaluate(program, assignment) if program is not None else None
    return Template(
        name=str(doc["name"]),
        scope=str(doc.get("scope", GLOBAL)),
        user_id=doc.get("user"),
        baked_assignment=assignment,
        baked_slots=tuple(sorted((str(k), str(v)) for k, v in doc.get("baked_slots", {}).items())),
        free=tuple(str(f) for f in doc.get("free", [])),
        entry=entry,
    )
