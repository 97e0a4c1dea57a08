"""Build interaction programs from site description files.

A site description is a UTF-8 JSON document. Top-level keys:

  site        identifier (string, required)
  title       display title (optional)
  schema      list of {name, values, exclusive?}            (required)
  catalog     {order?, items: [{id, content, values}]}      (one of catalog/pages)
  pages       explicit tree: {id, content?, edges: [{label, anchor, to}]}
  lexicon     {term: ["attr=value", ...]}                   (optional)
  implies     [{name, if: [...], then: [...]}]              (optional)
  content     {content-ref: {title, body}}                  (optional)
  activities  [{name, expressible?, goal?, choices_of?}]    (optional)

Unknown top-level keys are rejected. ``label`` on a pages edge is a list of
"attr=value" strings; labels with several variables (links that coalesce
multiple aspects) are split into chains of single-variable edges during load,
so every program variable is independently addressable. The format is this
project's own; sites are described in files rather than crawled, for
reproducibility.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Union

from .analyze import ActivitySpec, Goal
from .errors import (
    AmbiguousLeaf,
    DuplicateAttributeInLabel,
    ParseError,
    SchemaError,
    SizeLimitExceeded,
)
from .mapping import ImplicationRule, Lexicon, load_rules
from .model import (
    Assignment,
    Attribute,
    Branch,
    Catalog,
    CatalogItem,
    Edge,
    InteractionProgram,
    Leaf,
    Node,
    Schema,
    Variable,
    validate_program,
)

_TOP_LEVEL_KEYS = {
    "site", "title", "schema", "catalog", "pages",
    "lexicon", "implies", "content", "activities",
}

_SYNTHETIC_LEAF_LIMIT = 10 ** 6


@dataclass(frozen=True)
class ContentEntry:
    title: str = ""
    body: str = ""


@dataclass
class SiteBundle:
    """Everything one site description yields."""

    site_id: str
    title: str
    schema: Schema
    program: InteractionProgram
    lexicon: Lexicon
    rules: tuple[ImplicationRule, ...]
    content: dict[str, ContentEntry] = field(default_factory=dict)
    activities: tuple[ActivitySpec, ...] = ()
    report: list[str] = field(default_factory=list)
    catalog: Optional[Catalog] = None


# Raw page trees: the pages section before within-page splitting. ------------

@dataclass(frozen=True)
class RawEdge:
    label: tuple[Variable, ...]
    anchor: str
    child: "RawNode"
    resolved: bool = False


@dataclass(frozen=True)
class RawNode:
    page_id: str
    edges: tuple[RawEdge, ...] = ()
    content_ref: Optional[str] = None


def parse_schema(raw, location: str = "schema") -> Schema:
    if not isinstance(raw, list) or not raw:
        raise SchemaError(f"{location}: expected a non-empty list of attributes")
    attributes = []
    for i, entry in enumerate(raw):
        here = f"{location}[{i}]"
        if not isinstance(entry, dict) or "name" not in entry or "values" not in entry:
            raise SchemaError(f"{here}: attribute needs name and values")
        try:
            attributes.append(
                Attribute(
                    name=str(entry["name"]),
                    values=tuple(str(v) for v in entry["values"]),
                    exclusive=bool(entry.get("exclusive", True)),
                )
            )
        except ValueError as exc:
            raise SchemaError(f"{here}: {exc}") from exc
    try:
        return Schema(tuple(attributes))
    except ValueError as exc:
        raise SchemaError(f"{location}: {exc}") from exc


def build_hierarchy(
    catalog: Catalog, schema: Schema, order: list[str]
) -> InteractionProgram:
    """Organize a flat catalog as a browsing hierarchy.

    Level i branches on order[i]; an edge exists only for values actually
    present among the items surviving the path, so no dead end is ever
    built. Edge order follows the schema's declared value order. Two items
    identical on every ordered attribute cannot be told apart and raise
    AmbiguousLeaf.
    """
    for name in order:
        schema.attribute(name)
    if len(set(order)) != len(order):
        raise SchemaError("attribute order repeats an attribute")
    for item in catalog.items:
        for name in order:
            if item.value_of(name) is None:
                raise SchemaError(
                    f"item {item.item_id!r} lacks a value for ordered attribute {name!r}"
                )

    def build(items: list[CatalogItem], level: int, page_id: str) -> Node:
        if level == len(order):
            if len(items) > 1:
                raise AmbiguousLeaf(
                    "items are identical on all ordered attributes",
                    item_ids=[it.item_id for it in items],
                )
            item = items[0]
            return Leaf(page_id, item.content_ref)
        attr = schema.attribute(order[level])
        edges = []
        for value in attr.values:
            group = [it for it in items if it.value_of(attr.name) == value]
            if not group:
                continue
            child_id = f"{page_id}/{attr.name}={value}"
            child = build(group, level + 1, child_id)
            edges.append(Edge(Variable(attr.name, value), value, child))
        if not edges:
            raise AmbiguousLeaf(
                "items are identical on all ordered attributes",
                item_ids=[it.item_id for it in items],
            )
        return Branch(page_id, tuple(edges))

    if not catalog.items:
        raise ParseError("catalog has no items", location="catalog.items")
    return InteractionProgram(schema, build(list(catalog.items), 0, "root"))


def parse_pages(raw, schema: Schema, location: str = "pages") -> RawNode:
    if not isinstance(raw, dict):
        raise ParseError("expected a page object", location=location)
    if "id" not in raw:
        raise ParseError("page needs an id", location=location)
    page_id = str(raw["id"])
    content_ref = raw.get("content")
    edges_raw = raw.get("edges", [])
    if not isinstance(edges_raw, list):
        raise ParseError("edges must be a list", location=f"{location}.edges")
    edges = []
    for i, entry in enumerate(edges_raw):
        here = f"{location}.edges[{i}]"
        if not isinstance(entry, dict) or "label" not in entry or "to" not in entry:
            raise ParseError("edge needs label and to", location=here)
        label_raw = entry["label"]
        if isinstance(label_raw, str):
            label_raw = [label_raw]
        if not label_raw:
            raise ParseError("edge label is empty", location=f"{here}.label")
        try:
            label = tuple(Variable.parse(t) for t in label_raw)
        except ValueError as exc:
            raise ParseError(str(exc), location=f"{here}.label") from exc
        for var in label:
            if not schema.has_variable(var):
                raise ParseError(f"unknown variable {var}", location=f"{here}.label")
        child = parse_pages(entry["to"], schema, location=f"{here}.to")
        anchor = str(entry.get("anchor", " / ".join(v.value for v in label)))
        edges.append(
            RawEdge(label, anchor, child, resolved=bool(entry.get("resolved", False)))
        )
    node = RawNode(page_id, tuple(edges), None if content_ref is None else str(content_ref))
    if not edges and content_ref is None:
        raise ParseError(
            f"page {page_id!r} has no edges and no content", location=location
        )
    return node


def split_coalesced(node: RawNode, schema: Schema) -> RawNode:
    """Expand multi-variable edge labels into chains of single-variable edges.

    The chain follows the schema's attribute order. Labels sharing a prefix
    merge into one sub-chain, which keeps sibling variables distinct; a label
    that exhausts at a page another label continues past is a modeling
    conflict and is rejected.
    """
    for edge in node.edges:
        attrs = [v.attribute for v in edge.label]
        if len(set(attrs)) != len(attrs):
            raise DuplicateAttributeInLabel(
                f"label on page {node.page_id!r} repeats an attribute: "
                + ", ".join(str(v) for v in edge.label)
            )

    expanded: list[tuple[tuple[Variable, ...], RawEdge]] = []
    for edge in node.edges:
        ordered = tuple(
            sorted(edge.label, key=lambda v: schema.attribute_index(v.attribute))
        )
        child = split_coalesced(edge.child, schema)
        expanded.append((ordered, RawEdge(ordered, edge.anchor, child, edge.resolved)))

    def build(
        entries: list[tuple[tuple[Variable, ...], RawEdge]], page_id: str
    ) -> tuple[RawEdge, ...]:
        out: list[RawEdge] = []
        by_head: dict[Variable, list[tuple[tuple[Variable, ...], RawEdge]]] = {}
        order: list[Variable] = []
        for label, edge in entries:
            head = label[0]
            if head not in by_head:
                by_head[head] = []
                order.append(head)
            by_head[head].append((label, edge))
        for head in order:
            group = by_head[head]
            finals = [e for label, e in group if len(label) == 1]
            rest = [(label[1:], e) for label, e in group if len(label) > 1]
            if len(finals) > 1 or (finals and rest):
                raise ParseError(
                    f"coalesced labels conflict under {head} on page {page_id!r}",
                    location=page_id,
                )
            if finals:
                edge = finals[0]
                out.append(RawEdge((head,), edge.anchor, edge.child, edge.resolved))
            else:
                child_id = f"{page_id}::{head}"
                child = RawNode(child_id, build(rest, child_id), None)
                out.append(RawEdge((head,), head.value, child))
        return tuple(out)

    if not node.edges:
        return node
    return RawNode(node.page_id, build(expanded, node.page_id), node.content_ref)


def raw_to_program(node: RawNode, schema: Schema) -> InteractionProgram:
    def convert(raw: RawNode) -> Node:
        if not raw.edges:
            return Leaf(raw.page_id, raw.content_ref)
        edges = tuple(
            Edge(e.label[0], e.anchor, convert(e.child), e.resolved) for e in raw.edges
        )
        return Branch(raw.page_id, edges, raw.content_ref)

    return InteractionProgram(schema, convert(node))


def raw_path_valuations(node: RawNode, schema: Schema) -> list[tuple[str, Assignment]]:
    """Path semantics of a raw tree, treating a coalesced label as asserting
    all its variables at once. Used to check that splitting preserves paths."""
    out: list[tuple[str, Assignment]] = []

    def walk(raw: RawNode, traversed: tuple[Variable, ...]) -> None:
        if not raw.edges:
            entries = Assignment({v: True for v in traversed}).closed(schema)
            out.append((raw.page_id, entries))
            return
        for edge in raw.edges:
            gained = () if edge.resolved else tuple(edge.label)
            walk(edge.child, traversed + gained)

    walk(node, ())
    return out


def parse_catalog(raw, schema: Schema) -> tuple[Catalog, list[str]]:
    if not isinstance(raw, dict) or "items" not in raw:
        raise ParseError("catalog needs an items list", location="catalog")
    items = []
    for i, entry in enumerate(raw["items"]):
        here = f"catalog.items[{i}]"
        if not isinstance(entry, dict) or "id" not in entry or "values" not in entry:
            raise ParseError("item needs id and values", location=here)
        items.append(
            CatalogItem.from_mapping(
                str(entry["id"]),
                str(entry.get("content", entry["id"])),
                {str(k): str(v) for k, v in entry["values"].items()},
            )
        )
    order = [str(a) for a in raw.get("order", [attr.name for attr in schema.attributes])]
    return Catalog(tuple(items)), order


def parse_activities(raw, location: str = "activities") -> tuple[ActivitySpec, ...]:
    if not isinstance(raw, list):
        raise ParseError("activities must be a list", location=location)
    specs = []
    for i, entry in enumerate(raw):
        here = f"{location}[{i}]"
        if not isinstance(entry, dict) or "name" not in entry:
            raise ParseError("activity needs a name", location=here)
        name = str(entry["name"])
        if "choices_of" in entry:
            specs.append(ActivitySpec(name=name, meta_choices=str(entry["choices_of"])))
            continue
        expressible = Assignment.parse(entry.get("expressible", {}))
        goal_raw = entry.get("goal")
        if goal_raw is None:
            raise ParseError("activity needs a goal or choices_of", location=here)
        if "items" in goal_raw:
            goal = Goal.items(str(x) for x in goal_raw["items"])
        elif "constraints" in goal_raw:
            goal = Goal.of_constraints(
                {str(k): str(v) for k, v in goal_raw["constraints"].items()}
            )
        else:
            raise ParseError("goal needs items or constraints", location=f"{here}.goal")
        specs.append(ActivitySpec(name=name, expressible=expressible, goal=goal))
    return tuple(specs)


def load_site(source: Union[str, Path, Mapping]) -> SiteBundle:
    """Load a site description from a path, JSON text, or parsed document."""
    if isinstance(source, Mapping):
        doc = dict(source)
        origin = "<memory>"
    else:
        path = Path(source)
        origin = str(path)
        try:
            text = path.read_text(encoding="utf-8") if path.exists() else str(source)
        except OSError as exc:
            raise ParseError(f"cannot read {origin}: {exc}", location=origin) from exc
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(
                f"invalid JSON: {exc.msg}", location=f"{origin}:{exc.lineno}:{exc.colno}"
            ) from exc
    if not isinstance(doc, dict):
        raise ParseError("site description must be an object", location=origin)

    unknown = set(doc) - _TOP_LEVEL_KEYS
    if unknown:
        raise ParseError(
            f"unknown top-level keys: {', '.join(sorted(unknown))}", location=origin
        )
    if "site" not in doc:
        raise ParseError("missing site id", location=origin)
    if "schema" not in doc:
        raise SchemaError("missing schema section")

    schema = parse_schema(doc["schema"])
    catalog = None
    if ("catalog" in doc) == ("pages" in doc):
        raise ParseError("exactly one of catalog or pages is required", location=origin)
    if "catalog" in doc:
        catalog, order = parse_catalog(doc["catalog"], schema)
        catalog_report = catalog.validate(schema)
        if catalog_report:
            raise SchemaError("; ".join(catalog_report))
        program = build_hierarchy(catalog, schema, order)
    else:
        raw = parse_pages(doc["pages"], schema)
        raw = split_coalesced(raw, schema)
        program = raw_to_program(raw, schema)

    lexicon = Lexicon.from_mapping(doc.get("lexicon", {}), schema)
    rules = load_rules(doc.get("implies", []), schema)
    content = {
        str(ref): ContentEntry(
            title=str(entry.get("title", "")), body=str(entry.get("body", ""))
        )
        for ref, entry in doc.get("content", {}).items()
    }
    activities = parse_activities(doc.get("activities", []))
    report = validate_program(program)
    return SiteBundle(
        site_id=str(doc["site"]),
        title=str(doc.get("title", doc["site"])),
        schema=schema,
        program=program,
        lexicon=lexicon,
        rules=rules,
        content=content,
        activities=activities,
        report=report,
        catalog=catalog,
    )


# Serialization back out -------------------------------------------------------

def node_to_doc(node: Node) -> dict:
    doc: dict = {"id": node.page_id}
    if node.content_ref is not None:
        doc["content"] = node.content_ref
    if isinstance(node, Branch):
        doc["edges"] = [
            {
                "label": [str(edge.variable)],
                "anchor": edge.anchor,
                **({"resolved": True} if edge.resolved else {}),
                "to": node_to_doc(edge.child),
            }
            for edge in node.edges
        ]
    return doc


def node_from_doc(doc: Mapping, schema: Schema) -> Node:
    raw = parse_pages(dict(doc), schema, location="pages")
    return raw_to_program(raw, schema).root


def schema_to_doc(schema: Schema) -> list[dict]:
    return [
        {"name": a.name, "values": list(a.values), "exclusive": a.exclusive}
        for a in schema.attributes
    ]


def bundle_to_doc(bundle: SiteBundle) -> dict:
    """Serialize a bundle as a pages-form site description."""
    doc = {
        "site": bundle.site_id,
        "title": bundle.title,
        "schema": schema_to_doc(bundle.schema),
        "pages": node_to_doc(bundle.program.root),
    }
    if bundle.lexicon.entries:
        doc["lexicon"] = bundle.lexicon.to_mapping()
    if bundle.rules:
        doc["implies"] = [
            {
                "name": r.name,
                "if": sorted(str(v) for v in r.antecedents),
                "then": sorted(str(v) for v in r.consequents),
            }
            for r in bundle.rules
        ]
    if bundle.content:
        doc["content"] = {
            ref: {"title": c.title, "body": c.body} for ref, c in bundle.content.items()
        }
    if bundle.activities:
        doc["activities"] = [_activity_to_doc(a) for a in bundle.activities]
    return doc


def _activity_to_doc(activity: ActivitySpec) -> dict:
    if activity.meta_choices is not None:
        return {"name": activity.name, "choices_of": activity.meta_choices}
    doc: dict = {"name": activity.name, "expressible": activity.expressible.to_dict()}
    goal = activity.goal
    if goal.item_ids is not None:
        doc["goal"] = {"items": sorted(goal.item_ids)}
    else:
        doc["goal"] = {"constraints": dict(goal.constraints or ())}
    return doc


def save_site(bundle: SiteBundle, path: Union[str, Path]) -> dict:
    doc = bundle_to_doc(bundle)
    Path(path).write_text(json.dumps(doc, indent=2), encoding="utf-8")
    return doc


def generate_synthetic(depth: int, fanout: int, seed: int) -> InteractionProgram:
    """Deterministic uniform hierarchy for tests and benchmarks.

    depth levels, fanout values per level, fanout**depth leaves. The seed
    shuffles sibling order per node, nothing else.
    """
    if depth < 1 or fanout < 1:
        raise ValueError("depth and fanout must be at least 1")
    if fanout ** depth > _SYNTHETIC_LEAF_LIMIT:
        raise SizeLimitExceeded(
            f"{fanout}**{depth} leaves exceeds the {_SYNTHETIC_LEAF_LIMIT} cap"
        )
    rng = random.Random(seed)
    attributes = tuple(
        Attribute(f"a{level}", tuple(f"v{j}" for j in range(fanout)))
        for level in range(depth)
    )
    schema = Schema(attributes)

    def build(level: int, page_id: str) -> Node:
        if level == depth:
            return Leaf(page_id, f"item:{page_id}")
        attr = attributes[level]
        values = list(attr.values)
        rng.shuffle(values)
        edges = tuple(
            Edge(
                Variable(attr.name, value),
                value,
                build(level + 1, f"{page_id}/{attr.name}={value}"),
            )
            for value in values
        )
        return Branch(page_id, edges)

    return InteractionProgram(schema, build(0, "root"))
