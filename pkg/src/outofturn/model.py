"""Core value types for interaction programs.

An interaction program is a rooted decision tree over attribute-valued
variables. Interior nodes (branches) offer hyperlink edges, each labeled with
one variable, an (attribute, value) pair. Leaves carry content. Walking a
root-to-leaf path accumulates an assignment of variables, which is the partial
information the user has communicated so far.

Everything here is an immutable value. Transformations (see
:mod:`outofturn.evaluate`) return new programs; values can be shared freely
across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, Union

from .errors import InconsistentAssignment, UnknownVariable


@dataclass(frozen=True, order=True)
class Variable:
    """One (attribute, value) pair, e.g. ``maker=Nikon``.

    Every variable is an opportunity for the user to communicate one aspect
    of what they are looking for.
    """

    attribute: str
    value: str

    @classmethod
    def parse(cls, text: str) -> "Variable":
        if "=" not in text:
            raise ValueError(f"variable must look like attr=value, got {text!r}")
        attribute, _, value = text.partition("=")
        attribute = attribute.strip()
        value = value.strip()
        if not attribute or not value:
            raise ValueError(f"variable must look like attr=value, got {text!r}")
        return cls(attribute, value)

    def __str__(self) -> str:
        return f"{self.attribute}={self.value}"


@dataclass(frozen=True)
class Attribute:
    """A named attribute with an ordered set of values.

    ``exclusive`` means at most one value of this attribute may be true in
    any consistent assignment (the default; multi-select facets set it to
    False).
    """

    name: str
    values: tuple[str, ...]
    exclusive: bool = True

    def __post_init__(self):
        if not self.values:
            raise ValueError(f"attribute {self.name!r} needs at least one value")
        if len(set(self.values)) != len(self.values):
            raise ValueError(f"attribute {self.name!r} has duplicate values")


@dataclass(frozen=True)
class Schema:
    """The attribute universe of one site."""

    attributes: tuple[Attribute, ...]
    _by_name: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        by_name = {}
        for attr in self.attributes:
            if attr.name in by_name:
                raise ValueError(f"duplicate attribute name {attr.name!r}")
            by_name[attr.name] = attr
        object.__setattr__(self, "_by_name", by_name)

    def attribute(self, name: str) -> Attribute:
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownVariable(f"unknown attribute {name!r}") from None

    def has_attribute(self, name: str) -> bool:
        return name in self._by_name

    def has_variable(self, var: Variable) -> bool:
        attr = self._by_name.get(var.attribute)
        return attr is not None and var.value in attr.values

    def require_variable(self, var: Variable) -> None:
        if not self.has_variable(var):
            raise UnknownVariable(f"variable {var} is not in the schema")

    def attribute_index(self, name: str) -> int:
        for i, attr in enumerate(self.attributes):
            if attr.name == name:
                return i
        raise UnknownVariable(f"unknown attribute {name!r}")

    def variables(self) -> Iterator[Variable]:
        for attr in self.attributes:
            for value in attr.values:
                yield Variable(attr.name, value)


class Assignment:
    """A partial valuation of variables, the unit of partial information.

    Immutable by convention: all combining operations return new
    assignments. An assignment is consistent when no exclusive attribute has
    two values mapped true; closing an assignment against a schema adds the
    false entries implied by exclusivity.
    """

    __slots__ = ("_entries",)

    def __init__(self, entries: Mapping[Variable, bool] | Iterable[tuple[Variable, bool]] = ()):
        self._entries: dict[Variable, bool] = dict(entries)

    @classmethod
    def parse(cls, mapping: Mapping[str, bool]) -> "Assignment":
        return cls({Variable.parse(k): bool(v) for k, v in mapping.items()})

    def to_dict(self) -> dict[str, bool]:
        return {str(v): b for v, b in sorted(self._entries.items())}

    def get(self, var: Variable) -> Optional[bool]:
        return self._entries.get(var)

    def decides(self, var: Variable) -> bool:
        return var in self._entries

    def items(self) -> Iterator[tuple[Variable, bool]]:
        return iter(self._entries.items())

    def true_variables(self) -> tuple[Variable, ...]:
        return tuple(v for v, b in self._entries.items() if b)

    def false_variables(self) -> tuple[Variable, ...]:
        return tuple(v for v, b in self._entries.items() if not b)

    def is_empty(self) -> bool:
        return not self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[Variable]:
        return iter(self._entries)

    def __contains__(self, var: Variable) -> bool:
        return var in self._entries

    def __eq__(self, other) -> bool:
        if not isinstance(other, Assignment):
            return NotImplemented
        return self._entries == other._entries

    def __repr__(self) -> str:
        inner = ", ".join(f"{v}:{'T' if b else 'F'}" for v, b in sorted(self._entries.items()))
        return f"Assignment({inner})"

    def check_consistent(self, schema: Schema) -> None:
        """Raise InconsistentAssignment if an exclusive attribute has two trues."""
        seen: dict[str, str] = {}
        for var, val in self._entries.items():
            if not val:
                continue
            if schema.has_attribute(var.attribute) and schema.attribute(var.attribute).exclusive:
                prior = seen.get(var.attribute)
                if prior is not None and prior != var.value:
                    raise InconsistentAssignment(
                        f"{var.attribute}={prior} and {var} cannot both be true"
                    )
                seen[var.attribute] = var.value

    def closed(self, schema: Schema) -> "Assignment":
        """Return this assignment closed under exclusivity.

        For every true (a, v) with a exclusive, every other declared value of
        a is set false. Attributes unknown to the schema are kept as-is.
        """
        self.check_consistent(schema)
        entries = dict(self._entries)
        for var, val in self._entries.items():
            if not val or not schema.has_attribute(var.attribute):
                continue
            attr = schema.attribute(var.attribute)
            if not attr.exclusive:
                continue
            for other in attr.values:
                if other == var.value:
                    continue
                sibling = Variable(attr.name, other)
                if entries.get(sibling) is True:
                    raise InconsistentAssignment(
                        f"{var} and {sibling} cannot both be true"
                    )
                entries[sibling] = False
        return Assignment(entries)

    def union(self, other: "Assignment") -> "Assignment":
        merged = dict(self._entries)
        for var, val in other.items():
            if merged.get(var, val) != val:
                raise InconsistentAssignment(f"conflicting values for {var}")
            merged[var] = val
        return Assignment(merged)

    def consistent_with(self, other: "Assignment") -> bool:
        """True when no variable is mapped to opposite booleans."""
        small, big = (self, other) if len(self) <= len(other) else (other, self)
        for var, val in small.items():
            got = big.get(var)
            if got is not None and got != val:
                return False
        return True

    def undecided_in(self, other: "Assignment") -> "Assignment":
        """Entries of self whose variables are not decided by ``other``."""
        return Assignment({v: b for v, b in self._entries.items() if not other.decides(v)})


@dataclass(frozen=True)
class Leaf:
    page_id: str
    content_ref: Optional[str] = None


@dataclass(frozen=True)
class Edge:
    """A hyperlink: variable label, anchor text, and target subtree.

    ``resolved`` marks an edge whose variable is already known true, so
    traversing it asks nothing of the user. Resolved edges only arise from
    specialization; fresh sites never carry them.
    """

    variable: Variable
    anchor: str
    child: "Node"
    resolved: bool = False


@dataclass(frozen=True)
class Branch:
    page_id: str
    edges: tuple[Edge, ...]
    content_ref: Optional[str] = None


Node = Union[Branch, Leaf]


@dataclass(frozen=True)
class InteractionProgram:
    schema: Schema
    root: Node


@dataclass(frozen=True)
class PathValuation:
    """One root-to-leaf path: its leaf page and the assignment it induces."""

    leaf: str
    valuation: Assignment


@dataclass(frozen=True)
class CatalogItem:
    item_id: str
    content_ref: str
    values: tuple[tuple[str, str], ...]

    @classmethod
    def from_mapping(cls, item_id: str, content_ref: str, values: Mapping[str, str]) -> "CatalogItem":
        return cls(item_id, content_ref, tuple(sorted(values.items())))

    def value_of(self, attribute: str) -> Optional[str]:
        for attr, value in self.values:
            if attr == attribute:
                return value
        return None


@dataclass(frozen=True)
class Catalog:
    """A flat inventory from which browsing hierarchies are generated."""

    items: tuple[CatalogItem, ...]

    def validate(self, schema: Schema) -> list[str]:
        report = []
        seen = set()
        for item in self.items:
            if item.item_id in seen:
                report.append(f"duplicate-item-id: {item.item_id}")
            seen.add(item.item_id)
            for attr, value in item.values:
                if not schema.has_variable(Variable(attr, value)):
                    report.append(f"unknown-item-value: {item.item_id} {attr}={value}")
        return report


def iter_nodes(node: Node) -> Iterator[Node]:
    """Depth-first, left-to-right traversal."""
    stack = [node]
    while stack:
        current = stack.pop()
        yield current
        if isinstance(current, Branch):
            stack.extend(edge.child for edge in reversed(current.edges))


def program_pages(node: Node) -> frozenset[str]:
    return frozenset(n.page_id for n in iter_nodes(node))


def program_depth(node: Node) -> int:
    """Longest root-to-leaf path, counted in edges."""
    if isinstance(node, Leaf):
        return 0
    if not node.edges:
        return 0
    return 1 + max(program_depth(edge.child) for edge in node.edges)


def edge_variables(node: Node) -> frozenset[Variable]:
    """All variables actually appearing on edges (the schema in use)."""
    found = set()
    for n in iter_nodes(node):
        if isinstance(n, Branch):
            found.update(edge.variable for edge in n.edges)
    return frozenset(found)


def leaves(node: Node) -> list[Leaf]:
    return [n for n in iter_nodes(node) if isinstance(n, Leaf)]


def leaf_content_refs(node: Node) -> frozenset[str]:
    return frozenset(l.content_ref for l in leaves(node) if l.content_ref is not None)


def validate_program(program: InteractionProgram) -> list[str]:
    """Report every violated structural invariant (empty list means valid).

    Checks: unique page ids, schema conformance of edge variables, distinct
    sibling variables, no path assigning two values of one exclusive
    attribute, and canonical form (no branch with zero edges).
    """
    report: list[str] = []
    schema = program.schema
    seen_pages: set[str] = set()

    def walk(node: Node, path_true: dict[str, str]) -> None:
        if node.page_id in seen_pages:
            report.append(f"duplicate-page-id: {node.page_id}")
        seen_pages.add(node.page_id)
        if isinstance(node, Leaf):
            return
        if not node.edges:
            report.append(f"empty-branch: {node.page_id}")
            return
        sibling_vars: set[Variable] = set()
        for edge in node.edges:
            var = edge.variable
            if var in sibling_vars:
                report.append(f"duplicate-sibling-variable: {node.page_id} {var}")
            sibling_vars.add(var)
            if not schema.has_variable(var):
                report.append(f"unknown-edge-variable: {node.page_id} {var}")
                walk(edge.child, path_true)
                continue
            exclusive = schema.attribute(var.attribute).exclusive
            if exclusive and path_true.get(var.attribute, var.value) != var.value:
                report.append(
                    f"exclusive-conflict-on-path: {node.page_id} "
                    f"{var.attribute}={path_true[var.attribute]} then {var}"
                )
            child_true = path_true
            if exclusive:
                child_true = dict(path_true)
                child_true[var.attribute] = var.value
            walk(edge.child, child_true)

    walk(program.root, {})
    return report


def path_valuation_of(
    schema: Schema, traversed: Iterable[Variable]
) -> Assignment:
    """Assignment induced by traversing the given (unresolved) edge variables."""
    entries: dict[Variable, bool] = {}
    for var in traversed:
        entries[var] = True
    return Assignment(entries).closed(schema)


def enumerate_paths(program: InteractionProgram) -> list[PathValuation]:
    """Brute-force semantics of a program: one entry per leaf, left to right.

    The valuation of a path holds true for every unresolved edge variable
    traversed, plus the false entries implied by exclusivity. Resolved edges
    contribute nothing: their information is already decided.
    """
    out: list[PathValuation] = []

    def walk(node: Node, traversed: tuple[Variable, ...]) -> None:
        if isinstance(node, Leaf):
            out.append(
                PathValuation(node.page_id, path_valuation_of(program.schema, traversed))
            )
            return
        for edge in node.edges:
            if edge.resolved:
                walk(edge.child, traversed)
            else:
                walk(edge.child, traversed + (edge.variable,))

    walk(program.root, ())
    return out


def _edge_sort_key(edge: Edge):
    return (edge.variable.attribute, edge.variable.value, edge.resolved)


def nodes_equal(a: Node, b: Node, ignore_edge_order: bool = False) -> bool:
    if isinstance(a, Leaf) or isinstance(b, Leaf):
        return a == b
    if a.page_id != b.page_id or a.content_ref != b.content_ref:
        return False
    if len(a.edges) != len(b.edges):
        return False
    a_edges, b_edges = a.edges, b.edges
    if ignore_edge_order:
        a_edges = tuple(sorted(a_edges, key=_edge_sort_key))
        b_edges = tuple(sorted(b_edges, key=_edge_sort_key))
    for ea, eb in zip(a_edges, b_edges):
        if ea.variable != eb.variable or ea.anchor != eb.anchor or ea.resolved != eb.resolved:
            return False
        if not nodes_equal(ea.child, eb.child, ignore_edge_order):
            return False
    return True


def structurally_equal(
    a: InteractionProgram, b: InteractionProgram, ignore_edge_order: bool = False
) -> bool:
    """Structural program equality, optionally insensitive to sibling order."""
    return nodes_equal(a.root, b.root, ignore_edge_order)
