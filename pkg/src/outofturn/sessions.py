"""Sessions: accumulated partial information over a hosted site.

A session holds the assignment gathered so far and the program specialized
against it; the invariant ``current = specialize(base, applied)`` holds after
every mutation and is re-derived from scratch in debug mode. All mutations
append to a per-session event log first, so replaying the log rebuilds the
session exactly; that replay is both crash recovery and a consistency check.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Optional

from .errors import (
    AllTermsUnknown,
    Contradiction,
    InconsistentAssignment,
    NoSuchEdge,
    NotCompleted,
    NotSaved,
    ScopeMismatch,
    SessionNotActive,
    UnknownAttribute,
    UnknownSession,
    UnknownSite,
    UnknownTemplate,
)
from .evaluate import COMPLETE, EMPTY, SpecializationResult, partial_evaluate
from .ingest import SiteBundle, bundle_to_doc, load_site
from .mapping import explain_mapping
from .model import (
    Assignment,
    Branch,
    InteractionProgram,
    Variable,
    iter_nodes,
    program_pages,
    structurally_equal,
)
from .store import Store
from .templates import (
    Template,
    Trace,
    TraceEvent,
    template_from_doc,
)

ACTIVE = "active"
SAVED = "saved"
COMPLETED = "completed"


@dataclass(frozen=True)
class HistoryStep:
    seq: int
    kind: str  # template | click | out-of-turn | save | resume
    payload: dict


@dataclass
class Session:
    session_id: str
    site_id: str
    user_id: Optional[str]
    template_id: Optional[str]
    applied: Assignment
    current: SpecializationResult
    history: list[HistoryStep] = field(default_factory=list)
    status: str = ACTIVE
    was_saved: bool = False


@dataclass(frozen=True)
class OutOfTurnOutcome:
    session: Session
    warnings: tuple[str, ...] = ()
    no_match: bool = False


def _rebase(base: InteractionProgram, result: SpecializationResult) -> SpecializationResult:
    """Express a step result's eliminated pages relative to the base program."""
    before = program_pages(base.root)
    if result.program is None:
        return SpecializationResult(None, EMPTY, before)
    return SpecializationResult(
        result.program, result.kind, before - program_pages(result.program.root)
    )


class SessionManager:
    """Hosts sites and serializes mutations per session.

    Requests for different sessions proceed independently; requests for one
    session take that session's lock in arrival order.
    """

    def __init__(self, store: Store, debug_invariants: bool = False,
                 remember_threshold: int = 1):
        self.store = store
        self.debug_invariants = debug_invariants
        self.remember_threshold = remember_threshold
        self._sites: dict[str, SiteBundle] = {}
        self._sessions: dict[str, Session] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.RLock()

    # -- sites -----------------------------------------------------------------

    def install_site(self, doc: dict) -> SiteBundle:
        bundle = load_site(doc)
        with self._registry_lock:
            self.store.save_site_doc(bundle.site_id, bundle_to_doc(bundle))
            self._sites[bundle.site_id] = bundle
        return bundle

    def site(self, site_id: str) -> SiteBundle:
        with self._registry_lock:
            if site_id not in self._sites:
                try:
                    doc = self.store.load_site_doc(site_id)
                except Exception as exc:
                    raise UnknownSite(f"no site {site_id!r}") from exc
                self._sites[site_id] = load_site(doc)
            return self._sites[site_id]

    def list_sites(self) -> list[str]:
        with self._registry_lock:
            known = set(self._sites) | set(self.store.list_sites())
        return sorted(known)

    # -- templates ----------------------------------------------------------------

    def templates_for(self, site_id: str) -> list[Template]:
        bundle = self.site(site_id)
        docs = self.store.load_templates(site_id)
        return [template_from_doc(doc, program=bundle.program) for doc in docs]

    def save_templates(self, site_id: str, docs: list[dict]) -> None:
        self.site(site_id)
        self.store.save_templates(site_id, docs)

    def template(self, site_id: str, template_id: str) -> Template:
        for template in self.templates_for(site_id):
            if template.name == template_id:
                return template
        raise UnknownTemplate(f"site {site_id!r} has no template {template_id!r}")

    # -- session plumbing ------------------------------------------------------------

    def _lock_for(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(session_id, threading.Lock())

    def _get(self, session_id: str) -> Session:
        with self._registry_lock:
            session = self._sessions.get(session_id)
        if session is not None:
            return session
        if not self.store.session_exists(session_id):
            raise UnknownSession(f"no session {session_id!r}")
        session = self._replay(session_id, self.store.read_events(session_id))
        with self._registry_lock:
            self._sessions.setdefault(session_id, session)
            return self._sessions[session_id]

    def _log(self, session: Session, kind: str, payload: dict) -> None:
        event = {
            "seq": len(session.history),
            "kind": kind,
            "ts": time.time(),
            **payload,
        }
        self.store.append_event(session.session_id, event)
        session.history.append(HistoryStep(event["seq"], kind, payload))

    def _check_invariant(self, session: Session) -> None:
        if not self.debug_invariants:
            return
        base = self.site(session.site_id).program
        expected = partial_evaluate(base, session.applied)
        assert expected.kind == session.current.kind, (
            expected.kind, session.current.kind,
        )
        if expected.program is None:
            assert session.current.program is None
        else:
            assert structurally_equal(expected.program, session.current.program)
        assert expected.eliminated == session.current.eliminated

    # -- lifecycle ---------------------------------------------------------------------

    def create_session(
        self,
        site_id: str,
        template_id: Optional[str] = None,
        user_id: Optional[str] = None,
        session_id: Optional[str] = None,
    ) -> Session:
        bundle = self.site(site_id)
        applied = Assignment()
        if template_id is not None:
            template = self.template(site_id, template_id)
            if template.scope == "per-user" and template.user_id != user_id:
                raise ScopeMismatch(
                    f"template {template_id!r} belongs to user {template.user_id!r}"
                )
            applied = template.baked_assignment.closed(bundle.schema)
        current = partial_evaluate(bundle.program, applied)
        session = Session(
            session_id=session_id or uuid.uuid4().hex[:12],
            site_id=site_id,
            user_id=user_id,
            template_id=template_id,
            applied=applied,
            current=current,
            status=COMPLETED if current.kind == COMPLETE else ACTIVE,
        )
        with self._registry_lock:
            self._sessions[session.session_id] = session
        self._log(
            session,
            "created",
            {"site": site_id, "template": template_id, "user": user_id},
        )
        self._check_invariant(session)
        return session

    def _require_active(self, session: Session) -> None:
        if session.status != ACTIVE:
            raise SessionNotActive(
                f"session {session.session_id!r} is {session.status}"
            )

    def click(self, session_id: str, variable: Variable) -> Session:
        with self._lock_for(session_id):
            session = self._get(session_id)
            self._require_active(session)
            from .evaluate import click as click_op

            program = session.current.program
            if program is None:
                raise NoSuchEdge("no content matches this session")
            result = click_op(program, program.root.page_id, variable)
            base = self.site(session.site_id).program
            addition = Assignment({variable: True}).closed(base.schema)
            session.applied = session.applied.union(addition)
            session.current = _rebase(base, result)
            if session.current.kind == COMPLETE:
                session.status = COMPLETED
            self._log(session, "click", {"variable": str(variable)})
            self._check_invariant(session)
            return session

    def out_of_turn(self, session_id: str, terms: list[str]) -> OutOfTurnOutcome:
        with self._lock_for(session_id):
            session = self._get(session_id)
            self._require_active(session)
            bundle = self.site(session.site_id)
            try:
                trace = explain_mapping(
                    bundle.lexicon, bundle.rules, terms, bundle.schema
                )
            except AllTermsUnknown as exc:
                # Nothing recognized: the gap itself is the signal; state
                # stays as it was.
                return OutOfTurnOutcome(
                    session, warnings=tuple(f"unrecognized term: {t}" for t in exc.terms)
                )
            try:
                combined = session.applied.union(trace.assignment)
                combined.check_consistent(bundle.schema)
            except InconsistentAssignment as exc:
                chain = [p.describe(v, b) for v, b, p in trace.provenance]
                raise Contradiction(
                    f"out-of-turn input conflicts with this session: {exc.message}",
                    chain=chain,
                ) from exc
            result = partial_evaluate(bundle.program, combined)
            warnings = tuple(f"unrecognized term: {t}" for t in trace.unrecognized)
            if result.kind == EMPTY:
                return OutOfTurnOutcome(session, warnings=warnings, no_match=True)
            session.applied = combined
            session.current = result
            if session.current.kind == COMPLETE:
                session.status = COMPLETED
            primary = [
                str(v) for v, b, p in trace.provenance if b and p.source == "term"
            ]
            self._log(
                session,
                "out-of-turn",
                {"terms": list(terms), "variables": primary},
            )
            self._check_invariant(session)
            return OutOfTurnOutcome(session, warnings=warnings)

    def choices(self, session_id: str, attribute: str) -> list[str]:
        session = self._get(session_id)
        bundle = self.site(session.site_id)
        if not bundle.schema.has_attribute(attribute):
            raise UnknownAttribute(f"no attribute {attribute!r}")
        attr = bundle.schema.attribute(attribute)
        present: set[str] = set()
        for var, value in session.applied.items():
            if value and var.attribute == attribute:
                present.add(var.value)
        if session.current.program is not None:
            for node in iter_nodes(session.current.program.root):
                if isinstance(node, Branch):
                    for edge in node.edges:
                        if edge.variable.attribute == attribute:
                            present.add(edge.variable.value)
        return [value for value in attr.values if value in present]

    def save(self, session_id: str) -> Session:
        with self._lock_for(session_id):
            session = self._get(session_id)
            self._require_active(session)
            session.status = SAVED
            session.was_saved = True
            self._log(session, "save", {})
            self.store.write_snapshot(session_id, self._snapshot_doc(session))
            return session

    def resume(self, session_id: str) -> Session:
        with self._lock_for(session_id):
            session = self._get(session_id)
            if not session.was_saved:
                raise NotSaved(f"session {session_id!r} was never saved")
            if session.status == ACTIVE:
                return session  # resuming twice is a no-op
            if session.status == COMPLETED:
                raise SessionNotActive(f"session {session_id!r} is completed")
            base = self.site(session.site_id).program
            recomputed = partial_evaluate(base, session.applied)
            session.current = recomputed
            session.status = ACTIVE
            self._log(session, "resume", {})
            self._check_invariant(session)
            return session

    def export_trace(self, session_id: str) -> Trace:
        session = self._get(session_id)
        if session.status != COMPLETED:
            raise NotCompleted(f"session {session_id!r} is not completed")
        events: list[TraceEvent] = []
        for step in session.history:
            if step.kind == "click":
                var = Variable.parse(step.payload["variable"])
                events.append(TraceEvent("click", var.attribute, var.value, step.seq))
            elif step.kind == "out-of-turn":
                for text in step.payload.get("variables", []):
                    var = Variable.parse(text)
                    events.append(
                        TraceEvent("out-of-turn", var.attribute, var.value, step.seq)
                    )
        trace = Trace(session.session_id, session.user_id, tuple(events))
        lines = []
        for event in trace.events:
            doc = {"trace": trace.trace_id, "user": trace.user_id}
            doc.update(event.to_doc())
            lines.append(doc)
        self.store.save_trace(session_id, lines)
        return trace

    # -- recovery -----------------------------------------------------------------------

    def _snapshot_doc(self, session: Session) -> dict:
        return {
            "session": session.session_id,
            "site": session.site_id,
            "user": session.user_id,
            "template": session.template_id,
            "applied": session.applied.to_dict(),
            "status": session.status,
            "history_length": len(session.history),
            "pages": sorted(
                program_pages(session.current.program.root)
                if session.current.program is not None
                else []
            ),
        }

    def _replay(self, session_id: str, events: list[dict]) -> Session:
        """Rebuild a session by re-running its event log."""
        session: Optional[Session] = None
        for event in events:
            kind = event["kind"]
            if kind == "created":
                bundle = self.site(event["site"])
                applied = Assignment()
                template_id = event.get("template")
                if template_id:
                    template = self.template(event["site"], template_id)
                    applied = template.baked_assignment.closed(bundle.schema)
                current = partial_evaluate(bundle.program, applied)
                session = Session(
                    session_id=session_id,
                    site_id=event["site"],
                    user_id=event.get("user"),
                    template_id=template_id,
                    applied=applied,
                    current=current,
                    status=COMPLETED if current.kind == COMPLETE else ACTIVE,
                )
                session.history.append(
                    HistoryStep(0, "created", {
                        "site": event["site"],
                        "template": template_id,
                        "user": event.get("user"),
                    })
                )
                continue
            if session is None:
                raise UnknownSession(f"session {session_id!r} log starts mid-stream")
            bundle = self.site(session.site_id)
            base = bundle.program
            if kind == "click":
                variable = Variable.parse(event["variable"])
                from .evaluate import click as click_op

                program = session.current.program
                result = click_op(program, program.root.page_id, variable)
                session.applied = session.applied.union(
                    Assignment({variable: True}).closed(base.schema)
                )
                session.current = _rebase(base, result)
                if session.current.kind == COMPLETE:
                    session.status = COMPLETED
                session.history.append(
                    HistoryStep(event["seq"], "click", {"variable": event["variable"]})
                )
            elif kind == "out-of-turn":
                trace = explain_mapping(
                    bundle.lexicon, bundle.rules, event["terms"], bundle.schema
                )
                session.applied = session.applied.union(trace.assignment)
                session.current = partial_evaluate(base, session.applied)
                if session.current.kind == COMPLETE:
                    session.status = COMPLETED
                session.history.append(
                    HistoryStep(event["seq"], "out-of-turn", {
                        "terms": event["terms"],
                        "variables": event.get("variables", []),
                    })
                )
            elif kind == "save":
                session.status = SAVED
                session.was_saved = True
                session.history.append(HistoryStep(event["seq"], "save", {}))
            elif kind == "resume":
                session.status = ACTIVE
                session.current = partial_evaluate(base, session.applied)
                session.history.append(HistoryStep(event["seq"], "resume", {}))
        if session is None:
            raise UnknownSession(f"session {session_id!r} has an empty log")
        self._check_invariant(session)
        return session

    def rebuild(self, session_id: str) -> Session:
        """Replay the log from disk, bypassing the in-memory cache."""
        return self._replay(session_id, self.store.read_events(session_id))


def sessions_equal(a: Session, b: Session) -> bool:
    if (
        a.session_id != b.session_id
        or a.site_id != b.site_id
        or a.status != b.status
        or a.applied != b.applied
        or len(a.history) != len(b.history)
    ):
        return False
    if (a.current.program is None) != (b.current.program is None):
        return False
    if a.current.program is not None and not structurally_equal(
        a.current.program, b.current.program
    ):
        return False
    return a.current.eliminated == b.current.eliminated
