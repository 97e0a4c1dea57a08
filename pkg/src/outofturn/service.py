"""HTTP service hosting sites, sessions, and template derivation.

The service is a thin shell over :class:`outofturn.sessions.SessionManager`;
request and response shapes are pydantic models, and every domain error maps
onto a status code with a structured body (``{"error": code, "detail": ...}``).
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import __version__
from .analyze import audience, detect_frozen
from .errors import (
    AmbiguousLeaf,
    Contradiction,
    CorruptRecord,
    DuplicateAttributeInLabel,
    InconsistentAssignment,
    InvalidActivity,
    LexiconError,
    NoProof,
    NoSuchEdge,
    NotCompleted,
    NotSaved,
    OutOfTurnError,
    ParseError,
    RuleError,
    SchemaError,
    ScopeMismatch,
    ScopeViolation,
    SessionNotActive,
    SizeLimitExceeded,
    TheoryError,
    UnknownAttribute,
    UnknownRecord,
    UnknownSession,
    UnknownSite,
    UnknownTemplate,
    UnknownVariable,
)
from .model import Branch, Variable, enumerate_paths, validate_program
from .sessions import OutOfTurnOutcome, Session, SessionManager
from .store import Store
from .templates import (
    DomainTheory,
    Trace,
    TraceEvent,
    derive_templates,
    memory_template,
    remember,
    template_to_doc,
    validate_trace,
)

_STATUS_BY_ERROR = {
    UnknownSite: 404,
    UnknownTemplate: 404,
    UnknownSession: 404,
    UnknownRecord: 404,
    UnknownAttribute: 404,
    UnknownVariable: 400,
    NoSuchEdge: 400,
    ParseError: 400,
    SchemaError: 400,
    LexiconError: 400,
    RuleError: 400,
    TheoryError: 400,
    InvalidActivity: 400,
    AmbiguousLeaf: 400,
    DuplicateAttributeInLabel: 400,
    SizeLimitExceeded: 400,
    InconsistentAssignment: 409,
    Contradiction: 409,
    ScopeMismatch: 409,
    ScopeViolation: 409,
    SessionNotActive: 409,
    NotSaved: 409,
    NotCompleted: 409,
    CorruptRecord: 500,
    NoProof: 422,
}


# -- wire models -------------------------------------------------------------

class SiteInfo(BaseModel):
    site: str
    title: str
    pages: int
    leaves: int
    report: list[str]


class SiteList(BaseModel):
    sites: list[str]


class FrozenView(BaseModel):
    frozen: bool
    depth: int
    single_level_edges: list[str]


class VerdictView(BaseModel):
    activity: str
    kind: str
    witness: dict[str, Any]
    detail: str


class AnalysisView(BaseModel):
    site: str
    validation: list[str]
    frozen: FrozenView
    verdicts: list[VerdictView]
    summary: dict[str, int]


class TemplateView(BaseModel):
    name: str
    scope: str
    user: Optional[str] = None
    baked: dict[str, bool]
    baked_slots: dict[str, str]
    free: list[str]


class TemplateList(BaseModel):
    site: str
    templates: list[TemplateView]


class DeriveRequest(BaseModel):
    theory: dict
    traces: list[dict]
    max_frontier: Optional[int] = None
    top_k: Optional[int] = None
    remember_users: bool = Field(
        default=True,
        description="Fold rememberable slots of the posted traces into "
        "per-user templates as well.",
    )


class SessionCreate(BaseModel):
    site: str
    template: Optional[str] = None
    user: Optional[str] = None


class EdgeView(BaseModel):
    variable: str
    anchor: str
    resolved: bool = False


class ContentView(BaseModel):
    ref: str
    title: str = ""
    body: str = ""


class PageView(BaseModel):
    page_id: str
    content: Optional[ContentView] = None
    edges: list[EdgeView]


class SessionView(BaseModel):
    session_id: str
    site: str
    user: Optional[str]
    template: Optional[str]
    status: str
    kind: str
    page: Optional[PageView]
    applied: dict[str, bool]
    eliminated: list[str]
    warnings: list[str] = []
    no_match: bool = False


class ClickBody(BaseModel):
    variable: str


class OutOfTurnBody(BaseModel):
    terms: list[str]


class ChoicesView(BaseModel):
    session_id: str
    attribute: str
    values: list[str]


class TraceEventView(BaseModel):
    kind: str
    variable: str
    value: str
    timestamp: float


class TraceView(BaseModel):
    trace: str
    user: Optional[str]
    events: list[TraceEventView]


# -- view builders ---------------------------------------------------------------

def _page_view(manager: SessionManager, session: Session) -> Optional[PageView]:
    program = session.current.program
    if program is None:
        return None
    bundle = manager.site(session.site_id)
    root = program.root
    content = None
    if root.content_ref is not None:
        entry = bundle.content.get(root.content_ref)
        content = ContentView(
            ref=root.content_ref,
            title=entry.title if entry else "",
            body=entry.body if entry else "",
        )
    edges = []
    if isinstance(root, Branch):
        edges = [
            EdgeView(
                variable=str(edge.variable), anchor=edge.anchor, resolved=edge.resolved
            )
            for edge in root.edges
        ]
    return PageView(page_id=root.page_id, content=content, edges=edges)


def _session_view(
    manager: SessionManager,
    session: Session,
    warnings: tuple[str, ...] = (),
    no_match: bool = False,
) -> SessionView:
    return SessionView(
        session_id=session.session_id,
        site=session.site_id,
        user=session.user_id,
        template=session.template_id,
        status=session.status,
        kind=session.current.kind,
        page=_page_view(manager, session),
        applied=session.applied.to_dict(),
        eliminated=sorted(session.current.eliminated),
        warnings=list(warnings),
        no_match=no_match,
    )


def _parse_traces(raw_events: list[dict]) -> list[Trace]:
    grouped: dict[str, dict] = {}
    for doc in raw_events:
        trace_id = str(doc.get("trace", "trace-0"))
        entry = grouped.setdefault(trace_id, {"user": doc.get("user"), "events": []})
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


def create_app(
    data_dir: str,
    debug_invariants: bool = False,
    template_top_k: int = 5,
    remember_threshold: int = 1,
    static_dir: Optional[str] = None,
) -> FastAPI:
    store = Store(data_dir)
    manager = SessionManager(
        store,
        debug_invariants=debug_invariants,
        remember_threshold=remember_threshold,
    )
    app = FastAPI(title="outofturn", version=__version__)
    app.state.manager = manager
    app.state.template_top_k = template_top_k

    @app.exception_handler(OutOfTurnError)
    async def domain_error(request: Request, exc: OutOfTurnError):
        status = _STATUS_BY_ERROR.get(type(exc), 400)
        return JSONResponse(status_code=status, content=exc.to_dict())

    # -- sites ---------------------------------------------------------------

    @app.post("/sites", response_model=SiteInfo)
    def install_site(doc: dict) -> SiteInfo:
        bundle = manager.install_site(doc)
        paths = enumerate_paths(bundle.program)
        from .model import program_pages

        return SiteInfo(
            site=bundle.site_id,
            title=bundle.title,
            pages=len(program_pages(bundle.program.root)),
            leaves=len(paths),
            report=bundle.report,
        )

    @app.get("/sites", response_model=SiteList)
    def list_sites() -> SiteList:
        return SiteList(sites=manager.list_sites())

    @app.get("/sites/{site_id}/analysis", response_model=AnalysisView)
    def site_analysis(site_id: str) -> AnalysisView:
        bundle = manager.site(site_id)
        frozen = detect_frozen(bundle.program)
        report = audience(bundle.program, list(bundle.activities))
        return AnalysisView(
            site=site_id,
            validation=validate_program(bundle.program),
            frozen=FrozenView(
                frozen=frozen.frozen,
                depth=frozen.depth,
                single_level_edges=list(frozen.single_level_edges),
            ),
            verdicts=[
                VerdictView(
                    activity=name,
                    kind=verdict.kind,
                    witness=verdict.witness,
                    detail=verdict.detail,
                )
                for name, verdict in report.rows
            ],
            summary=dict(report.summary),
        )

    @app.get("/sites/{site_id}/templates", response_model=TemplateList)
    def list_templates(site_id: str) -> TemplateList:
        templates = manager.templates_for(site_id)
        return TemplateList(
            site=site_id,
            templates=[
                TemplateView(
                    name=t.name,
                    scope=t.scope,
                    user=t.user_id,
                    baked=t.baked_assignment.to_dict(),
                    baked_slots=dict(t.baked_slots),
                    free=list(t.free),
                )
                for t in templates
            ],
        )

    @app.post("/sites/{site_id}/templates", response_model=TemplateList)
    def derive_site_templates(site_id: str, body: DeriveRequest) -> TemplateList:
        bundle = manager.site(site_id)
        theory = DomainTheory.from_doc(body.theory)
        traces = _parse_traces(body.traces)
        problems = [
            problem
            for trace in traces
            for problem in validate_trace(trace, schema=bundle.schema, theory=theory)
        ]
        if problems:
            raise TheoryError("; ".join(problems))
        rows = derive_templates(
            theory,
            traces,
            program=bundle.program,
            max_frontier=body.max_frontier,
            top_k=body.top_k or app.state.template_top_k,
        )
        templates = [row.template for row in rows]
        if body.remember_users:
            by_user: dict[str, list[Trace]] = {}
            for trace in traces:
                if trace.user_id:
                    by_user.setdefault(trace.user_id, []).append(trace)
            for user_id, user_traces in sorted(by_user.items()):
                memory = None
                stored = store.load_user(user_id)
                if stored:
                    from .templates import UserMemory

                    memory = UserMemory(
                        user_id, tuple(tuple(o) for o in stored.get("observations", []))
                    )
                for trace in user_traces:
                    memory = remember(memory, trace, theory)
                store.save_user(
                    user_id,
                    {"user": user_id, "observations": [list(o) for o in memory.observations]},
                )
                stored_template = memory_template(
                    memory,
                    theory,
                    threshold=manager.remember_threshold,
                    program=bundle.program,
                )
                if stored_template.baked_slots:
                    templates.append(stored_template)
        docs = [template_to_doc(t) for t in templates]
        manager.save_templates(site_id, docs)
        return list_templates(site_id)

    # -- sessions --------------------------------------------------------------

    @app.post("/sessions", response_model=SessionView)
    def create_session(body: SessionCreate) -> SessionView:
        session = manager.create_session(
            body.site, template_id=body.template, user_id=body.user
        )
        return _session_view(manager, session)

    @app.get("/sessions/{session_id}/page", response_model=SessionView)
    def session_page(session_id: str) -> SessionView:
        session = manager._get(session_id)
        return _session_view(manager, session)

    @app.post("/sessions/{session_id}/click", response_model=SessionView)
    def session_click(session_id: str, body: ClickBody) -> SessionView:
        session = manager.click(session_id, Variable.parse(body.variable))
        return _session_view(manager, session)

    @app.post("/sessions/{session_id}/out-of-turn", response_model=SessionView)
    def session_out_of_turn(session_id: str, body: OutOfTurnBody) -> SessionView:
        outcome: OutOfTurnOutcome = manager.out_of_turn(session_id, body.terms)
        return _session_view(
            manager,
            outcome.session,
            warnings=outcome.warnings,
            no_match=outcome.no_match,
        )

    @app.get("/sessions/{session_id}/choices", response_model=ChoicesView)
    def session_choices(
        session_id: str, attribute: str = Query(...)
    ) -> ChoicesView:
        values = manager.choices(session_id, attribute)
        return ChoicesView(session_id=session_id, attribute=attribute, values=values)

    @app.post("/sessions/{session_id}/save", response_model=SessionView)
    def session_save(session_id: str) -> SessionView:
        return _session_view(manager, manager.save(session_id))

    @app.post("/sessions/{session_id}/resume", response_model=SessionView)
    def session_resume(session_id: str) -> SessionView:
        return _session_view(manager, manager.resume(session_id))

    @app.get("/sessions/{session_id}/trace", response_model=TraceView)
    def session_trace(session_id: str) -> TraceView:
        trace = manager.export_trace(session_id)
        return TraceView(
            trace=trace.trace_id,
            user=trace.user_id,
            events=[
                TraceEventView(
                    kind=e.kind, variable=e.name, value=e.value, timestamp=e.timestamp
                )
                for e in trace.events
            ],
        )

    static = Path(static_dir) if static_dir else None
    if static and static.is_dir():
        app.mount("/ui", StaticFiles(directory=str(static), html=True), name="ui")

    return app
