"""Map out-of-turn user terms to closed assignments.

A lexicon sends normalized terms to variables asserted true. Implication
rules propagate domain dependencies (saying "Senior seat" also means the
senate branch). After forward-chaining the rules to a fixpoint, exclusivity
closure fills in the false entries for conflicting values. The mapping is
exact-match only, by design: it stays auditable, and anything richer belongs
in a pluggable layer in front of it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

from .errors import AllTermsUnknown, Contradiction, LexiconError, RuleError
from .model import Assignment, Schema, Variable

_WS = re.compile(r"\s+")


def normalize_term(term: str) -> str:
    """Case-fold, trim, and collapse internal whitespace."""
    return _WS.sub(" ", term.strip()).casefold()


@dataclass(frozen=True)
class Lexicon:
    entries: tuple[tuple[str, tuple[Variable, ...]], ...]

    @classmethod
    def from_mapping(
        cls, mapping: Mapping[str, Iterable[str]], schema: Schema
    ) -> "Lexicon":
        """Build and validate a lexicon from {term: [attr=value, ...]}."""
        seen: dict[str, tuple[Variable, ...]] = {}
        for term, var_texts in mapping.items():
            norm = normalize_term(term)
            if not norm:
                raise LexiconError(f"empty term {term!r}")
            if norm in seen:
                raise LexiconError(f"duplicate term after normalization: {norm!r}")
            variables = tuple(Variable.parse(t) for t in var_texts)
            if not variables:
                raise LexiconError(f"term {term!r} maps to no variables")
            for var in variables:
                if not schema.has_variable(var):
                    raise LexiconError(f"term {term!r} references unknown variable {var}")
            by_attr: dict[str, str] = {}
            for var in variables:
                if schema.attribute(var.attribute).exclusive:
                    prior = by_attr.setdefault(var.attribute, var.value)
                    if prior != var.value:
                        raise LexiconError(
                            f"term {term!r} asserts two values of exclusive "
                            f"attribute {var.attribute!r}"
                        )
            seen[norm] = variables
        return cls(tuple(sorted(seen.items())))

    def lookup(self, term: str) -> Optional[tuple[Variable, ...]]:
        norm = normalize_term(term)
        for key, variables in self.entries:
            if key == norm:
                return variables
        return None

    def to_mapping(self) -> dict[str, list[str]]:
        return {term: [str(v) for v in variables] for term, variables in self.entries}


@dataclass(frozen=True)
class ImplicationRule:
    name: str
    antecedents: frozenset[Variable]
    consequents: frozenset[Variable]


def load_rules(raw: Iterable[Mapping], schema: Schema) -> tuple[ImplicationRule, ...]:
    """Parse rules of the form {name, if: [...], then: [...]} and check them.

    The rule dependency graph (one rule feeds another when its consequents
    intersect the other's antecedents) must be acyclic.
    """
    rules = []
    names = set()
    for i, entry in enumerate(raw):
        name = str(entry.get("name") or f"rule-{i}")
        if name in names:
            raise RuleError(f"duplicate rule name {name!r}")
        names.add(name)
        antecedents = frozenset(Variable.parse(t) for t in entry.get("if", ()))
        consequents = frozenset(Variable.parse(t) for t in entry.get("then", ()))
        if not antecedents or not consequents:
            raise RuleError(f"rule {name!r} needs both antecedents and consequents")
        for var in antecedents | consequents:
            if not schema.has_variable(var):
                raise RuleError(f"rule {name!r} references unknown variable {var}")
        rules.append(ImplicationRule(name, antecedents, consequents))

    edges = {
        a.name: {
            b.name
            for b in rules
            if b.name != a.name and a.consequents & b.antecedents
        }
        for a in rules
    }
    state: dict[str, int] = {}

    def visit(node: str) -> None:
        state[node] = 1
        for nxt in edges[node]:
            mark = state.get(nxt, 0)
            if mark == 1:
                raise RuleError(f"rule dependency cycle through {node!r} and {nxt!r}")
            if mark == 0:
                visit(nxt)
        state[node] = 2

    for rule in rules:
        if state.get(rule.name, 0) == 0:
            visit(rule.name)
    return tuple(rules)


@dataclass(frozen=True)
class Provenance:
    source: str  # "term" | "rule" | "closure"
    origin: str  # the term text, rule name, or the variable that forced closure

    def describe(self, var: Variable, value: bool) -> str:
        flag = "true" if value else "false"
        if self.source == "term":
            return f"{var} {flag} from term {self.origin!r}"
        if self.source == "rule":
            return f"{var} {flag} from rule {self.origin!r}"
        return f"{var} {flag} from exclusivity of {self.origin}"


@dataclass(frozen=True)
class MappingTrace:
    assignment: Assignment
    unrecognized: tuple[str, ...]
    provenance: tuple[tuple[Variable, bool, Provenance], ...]

    def provenance_of(self, var: Variable) -> Optional[Provenance]:
        for v, _, prov in self.provenance:
            if v == var:
                return prov
        return None


def explain_mapping(
    lexicon: Lexicon,
    rules: Iterable[ImplicationRule],
    terms: Iterable[str],
    schema: Schema,
) -> MappingTrace:
    """Compute the assignment for ``terms`` together with a derivation trace.

    True entries are seeded by recognized terms, propagated through the
    implication rules to a fixpoint, and exclusivity closure finally adds the
    false entries. Each derived entry carries exactly one provenance record,
    the first derivation that produced it. Raises Contradiction with the full
    derivation chain when a variable comes out both true and false, and
    AllTermsUnknown when input was given but nothing was recognized.
    """
    terms = list(terms)
    rules = list(rules)
    trues: dict[Variable, Provenance] = {}
    unrecognized: list[str] = []

    for term in terms:
        variables = lexicon.lookup(term)
        if variables is None:
            unrecognized.append(term)
            continue
        for var in variables:
            trues.setdefault(var, Provenance("term", term))
    if terms and not trues:
        raise AllTermsUnknown(
            "no term was recognized by the lexicon", terms=unrecognized
        )

    changed = True
    while changed:
        changed = False
        for rule in rules:
            if rule.antecedents <= trues.keys():
                for var in sorted(rule.consequents):
                    if var not in trues:
                        trues[var] = Provenance("rule", rule.name)
                        changed = True

    falses: dict[Variable, Provenance] = {}
    order: list[tuple[Variable, bool, Provenance]] = [
        (var, True, prov) for var, prov in trues.items()
    ]
    for var in list(trues):
        attr = schema.attribute(var.attribute)
        if not attr.exclusive:
            continue
        for value in attr.values:
            if value == var.value:
                continue
            sibling = Variable(attr.name, value)
            if sibling in trues:
                chain = [
                    trues[var].describe(var, True),
                    trues[sibling].describe(sibling, True),
                    f"{sibling} false from exclusivity of {var}",
                ]
                raise Contradiction(
                    f"{var} and {sibling} cannot both hold", chain=chain
                )
            if sibling not in falses:
                prov = Provenance("closure", str(var))
                falses[sibling] = prov
                order.append((sibling, False, prov))

    entries = {var: True for var in trues}
    entries.update({var: False for var in falses})
    return MappingTrace(
        assignment=Assignment(entries),
        unrecognized=tuple(unrecognized),
        provenance=tuple(order),
    )


def map_terms(
    lexicon: Lexicon,
    rules: Iterable[ImplicationRule],
    terms: Iterable[str],
    schema: Schema,
) -> tuple[Assignment, list[str]]:
    """Assignment for ``terms`` plus the list of unrecognized terms."""
    trace = explain_mapping(lexicon, rules, terms, schema)
    return trace.assignment, list(trace.unrecognized)
