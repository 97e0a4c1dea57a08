"""Command line interface.

All commands are thin wrappers: ``serve`` starts the HTTP service, the rest
load files, call the library, and print structured reports. Every
configuration flag can also come from an environment variable
(OUTOFTURN_*); explicit flags win.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .analyze import audience, detect_frozen
from .errors import OutOfTurnError
from .evaluate import partial_evaluate
from .ingest import bundle_to_doc, load_site, parse_activities
from .model import Assignment, Leaf, Variable, validate_program
from .store import Store
from .templates import (
    DomainTheory,
    derive_templates,
    load_traces,
    template_to_doc,
)


def _fail(exc: OutOfTurnError) -> None:
    click.echo(json.dumps(exc.to_dict(), indent=2), err=True)
    sys.exit(1)


def _render_node(node, bundle, indent: str = "") -> list[str]:
    lines = []
    if isinstance(node, Leaf):
        entry = bundle.content.get(node.content_ref) if node.content_ref else None
        title = f"  [{entry.title}]" if entry and entry.title else ""
        lines.append(f"{indent}* {node.page_id}{title}")
        return lines
    lines.append(f"{indent}{node.page_id}")
    for edge in node.edges:
        mark = "=" if edge.resolved else ">"
        lines.append(f"{indent}  {mark} {edge.variable}  ({edge.anchor!r})")
        lines.extend(_render_node(edge.child, bundle, indent + "      "))
    return lines


@click.group()
@click.version_option()
def main() -> None:
    """Personalized hierarchical browsing toolkit."""


@main.command()
@click.option("--port", type=int, default=8000, envvar="OUTOFTURN_PORT",
              show_envvar=True, help="Port to listen on.")
@click.option("--host", default="127.0.0.1", envvar="OUTOFTURN_HOST", show_envvar=True)
@click.option("--data-dir", default="./outofturn-data", envvar="OUTOFTURN_DATA_DIR",
              show_envvar=True, help="Directory for durable state.")
@click.option("--template-top-k", type=int, default=5, envvar="OUTOFTURN_TOP_K",
              show_envvar=True, help="How many scored templates to keep per site.")
@click.option("--remember-threshold", type=int, default=1,
              envvar="OUTOFTURN_REMEMBER_THRESHOLD", show_envvar=True,
              help="Sightings before a slot value is remembered for a user.")
@click.option("--static-dir", default=None, envvar="OUTOFTURN_STATIC_DIR",
              show_envvar=True, help="Built UI assets to serve under /ui.")
@click.option("--preload", multiple=True, type=click.Path(exists=True),
              help="Site description files to install at startup.")
def serve(port, host, data_dir, template_top_k, remember_threshold, static_dir, preload):
    """Run the session service."""
    import uvicorn

    from .service import create_app

    app = create_app(
        data_dir,
        template_top_k=template_top_k,
        remember_threshold=remember_threshold,
        static_dir=static_dir,
    )
    for path in preload:
        bundle = app.state.manager.install_site(json.loads(Path(path).read_text()))
        click.echo(f"installed site {bundle.site_id!r}", err=True)
    uvicorn.run(app, host=host, port=port, log_level="info")


@main.command()
@click.option("--site", "site_path", required=True, type=click.Path(exists=True),
              help="Site description file.")
@click.option("--data-dir", default=None, envvar="OUTOFTURN_DATA_DIR", show_envvar=True,
              help="Install the site into this service data directory.")
def ingest(site_path, data_dir):
    """Validate a site description and optionally install it."""
    try:
        bundle = load_site(site_path)
    except OutOfTurnError as exc:
        _fail(exc)
    payload = {
        "site": bundle.site_id,
        "title": bundle.title,
        "attributes": [a.name for a in bundle.schema.attributes],
        "report": bundle.report,
        "valid": not bundle.report,
    }
    if data_dir:
        Store(data_dir).save_site_doc(bundle.site_id, bundle_to_doc(bundle))
        payload["installed"] = data_dir
    click.echo(json.dumps(payload, indent=2))
    if bundle.report:
        sys.exit(1)


@main.command()
@click.option("--site", "site_path", required=True, type=click.Path(exists=True))
@click.option("--assign", "assigns", multiple=True,
              help="attr=value to assert, repeatable.")
@click.option("--terms", default=None,
              help="Comma-separated out-of-turn terms, mapped via the site lexicon.")
@click.option("--json", "as_json", is_flag=True, help="Emit JSON instead of a tree.")
def specialize(site_path, assigns, terms, as_json):
    """Specialize a site's program against partial information."""
    from .ingest import node_to_doc
    from .mapping import map_terms

    try:
        bundle = load_site(site_path)
        assignment = Assignment({Variable.parse(a): True for a in assigns})
        warnings: list[str] = []
        if terms:
            term_list = [t.strip() for t in terms.split(",") if t.strip()]
            mapped, unknown = map_terms(
                bundle.lexicon, bundle.rules, term_list, bundle.schema
            )
            warnings = [f"unrecognized term: {t}" for t in unknown]
            assignment = assignment.union(mapped)
        result = partial_evaluate(bundle.program, assignment)
    except OutOfTurnError as exc:
        _fail(exc)
    if as_json:
        payload = {
            "site": bundle.site_id,
            "kind": result.kind,
            "eliminated": sorted(result.eliminated),
            "warnings": warnings,
            "program": node_to_doc(result.program.root) if result.program else None,
        }
        click.echo(json.dumps(payload, indent=2))
        return
    click.echo(f"kind: {result.kind}")
    for warning in warnings:
        click.echo(f"warning: {warning}")
    if result.program is None:
        click.echo("no content matches the given information")
    else:
        click.echo("\n".join(_render_node(result.program.root, bundle)))
    if result.eliminated:
        click.echo(f"eliminated pages: {', '.join(sorted(result.eliminated))}")


@main.command()
@click.option("--site", "site_path", required=True, type=click.Path(exists=True))
@click.option("--activities", "activities_path", type=click.Path(exists=True),
              default=None,
              help="JSON list of activities; defaults to the site's own.")
def analyze(site_path, activities_path):
    """Personability verdicts and frozen-design detection for a site."""
    try:
        bundle = load_site(site_path)
        activities = list(bundle.activities)
        if activities_path:
            raw = json.loads(Path(activities_path).read_text(encoding="utf-8"))
            activities = list(parse_activities(raw))
        frozen = detect_frozen(bundle.program)
        report = audience(bundle.program, activities)
    except OutOfTurnError as exc:
        _fail(exc)
    payload = {
        "site": bundle.site_id,
        "validation": validate_program(bundle.program),
        "frozen": {
            "frozen": frozen.frozen,
            "depth": frozen.depth,
            "single_level_edges": list(frozen.single_level_edges),
        },
        "verdicts": [
            {
                "activity": name,
                "kind": verdict.kind,
                "witness": verdict.witness,
                "detail": verdict.detail,
            }
            for name, verdict in report.rows
        ],
        "summary": dict(report.summary),
    }
    click.echo(json.dumps(payload, indent=2))


@main.command("derive-templates")
@click.option("--theory", "theory_path", required=True, type=click.Path(exists=True))
@click.option("--traces", "traces_path", required=True, type=click.Path(exists=True))
@click.option("--site", "site_path", type=click.Path(exists=True), default=None,
              help="Site description; enables entry-program computation.")
@click.option("--max-frontier", type=int, default=None,
              help="Bound on cut size during enumeration.")
@click.option("--top-k", type=int, default=5, envvar="OUTOFTURN_TOP_K", show_envvar=True)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Write the template documents to this file.")
def derive_templates_cmd(theory_path, traces_path, site_path, max_frontier, top_k, out_path):
    """Explain traces against a theory and emit scored templates."""
    try:
        theory = DomainTheory.load(theory_path)
        traces = load_traces(traces_path)
        program = load_site(site_path).program if site_path else None
        rows = derive_templates(
            theory, traces, program=program, max_frontier=max_frontier, top_k=top_k
        )
    except OutOfTurnError as exc:
        _fail(exc)
    payload = {
        "theory": theory.name,
        "traces": len(traces),
        "templates": [
            {
                **template_to_doc(row.template),
                "coverage": row.coverage,
                "savings": row.savings,
                "utility": row.utility,
            }
            for row in rows
        ],
    }
    if out_path:
        Path(out_path).write_text(
            json.dumps([template_to_doc(r.template) for r in rows], indent=2),
            encoding="utf-8",
        )
    click.echo(json.dumps(payload, indent=2))


if __name__ == "__main__":
    main()
