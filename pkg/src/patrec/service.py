"""HTTP API over knowledge bases and sessions.

Endpoints mirror the session operations one-to-one so clients carry no
recommendation logic:

    GET    /kbs
    GET    /kbs/{kb_id}
    POST   /sessions                         {requirement, kb}
    GET    /sessions/{id}
    GET    /sessions/{id}/question
    POST   /sessions/{id}/answers            {property, value}
    DELETE /sessions/{id}/answers/{property}
    POST   /sessions/{id}/assistant          {question}
    GET    /sessions/{id}/recommendations
    POST   /sessions/{id}/selection          {pattern}

All responses are JSON. Errors use a uniform envelope
{"error": {"code", "message", "details"}}. Every mutation persists the
session snapshot before the response leaves; per-session operations are
serialized by a per-session lock.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response

from . import errors
from .assistant import AssistantConfig, ask, build_assistant
from .catalog import KBCatalog
from .dsl import ParseError, render_condition
from .lint import lint_kb
from .model import KnowledgeBase
from .scoring import payload_json_bytes
from .session import Session, SessionState, start_session
from .store import SessionStore

__all__ = ["ServiceConfig", "create_app"]


@dataclass
class ServiceConfig:
    kb_dir: str
    store_dir: str
    assistant: AssistantConfig = field(default_factory=AssistantConfig)


_ERROR_STATUS = {
    errors.UnknownSessionError: (404, "unknown_session"),
    errors.UnknownReferenceError: (404, "unknown_reference"),
    errors.DomainValueError: (400, "domain_value"),
    ParseError: (400, "parse_error"),
    errors.SnapshotFormatError: (500, "snapshot_unreadable"),
    errors.SchemaVersionError: (409, "schema_version_mismatch"),
    errors.SessionStateError: (409, "session_state"),
    errors.ConstraintViolatedError: (409, "contextual_constraint"),
    errors.EmptyFeasibleSetError: (409, "empty_feasible_set"),
    errors.DegenerateWeightsError: (409, "degenerate_weights"),
    errors.IncompleteContextError: (409, "incomplete_context"),
    errors.InvalidKnowledgeBaseError: (400, "invalid_kb"),
    errors.ConfigError: (400, "config"),
}


def _error_response(status: int, code: str, message: str, details=None) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"error": {"code": code, "message": message, "details": details}},
    )


def _kb_summary(kb: KnowledgeBase) -> dict:
    return {
        "id": kb.id,
        "level": kb.level.value,
        "description": kb.description,
        "patterns": len(kb.patterns),
        "context_properties": len(kb.context_properties()),
        "pattern_properties": len(kb.pattern_properties()),
        "filters": len(kb.filter_conditions),
        "criteria": [c.id for c in kb.criteria],
    }


def _kb_detail(kb: KnowledgeBase) -> dict:
    return {
        **_kb_summary(kb),
        "properties": [
            {
                "id": p.id,
                "kind": p.kind.value,
                "domain": list(p.domain),
                "question": p.question_text,
                "description": p.description,
            }
            for p in kb.property_decls
        ],
        "pattern_definitions": [
            {
                "id": p.id,
                "level": p.level.value,
                "values": dict(p.values),
                "description": p.description,
                "has_child": p.child_ref is not None,
            }
            for p in kb.patterns
        ],
        "filter_conditions": [
            {
                "id": f.id,
                "when": render_condition(f.guard),
                "require": render_condition(f.requirement),
                "message": f.message,
            }
            for f in kb.filter_conditions
        ],
        "warnings": [str(w) for w in lint_kb(kb)],
    }


def _session_view(session: Session) -> dict:
    """Snapshot plus the derived fields clients always need."""
    view = session.snapshot()
    view["feasible_count"] = session.feasible_count()
    return view


def create_app(config: ServiceConfig) -> FastAPI:
    catalog = KBCatalog.from_dir(config.kb_dir)
    store = SessionStore(config.store_dir)
    assistant = build_assistant(config.assistant)

    app = FastAPI(title="patrec", docs_url=None, redoc_url=None)
    app.state.catalog = catalog
    app.state.store = store
    app.state.config = config

    # The browser front end is served as static files from another origin.
    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(errors.PatrecError)
    async def patrec_error_handler(_request: Request, exc: errors.PatrecError):
        for klass, (status, code) in _ERROR_STATUS.items():
            if isinstance(exc, klass):
                details = getattr(exc, "constraint_ids", None) or getattr(exc, "violations", None)
                if details is not None:
                    details = [str(d) for d in details]
                return _error_response(status, code, str(exc), details)
        return _error_response(500, "internal", str(exc))

    @app.exception_handler(RequestValidationError)
    async def validation_error_handler(_request: Request, exc: RequestValidationError):
        return _error_response(400, "bad_request", "request body does not match the endpoint schema",
                               [str(e.get("msg", "")) for e in exc.errors()])

    def load_session(session_id: str) -> Session:
        return Session.restore(store.load(session_id), catalog)

    # -- knowledge bases ----------------------------------------------------

    @app.get("/kbs")
    def list_kbs():
        return [_kb_summary(catalog.get(kb_id)) for kb_id in sorted(catalog.ids())]

    @app.get("/kbs/{kb_id}")
    def get_kb(kb_id: str):
        return _kb_detail(catalog.get(kb_id))

    # -- sessions -----------------------------------------------------------

    @app.post("/sessions", status_code=201)
    def create_session(body: dict):
        requirement = body.get("requirement", "")
        kb_id = body.get("kb")
        if not isinstance(kb_id, str):
            return _error_response(400, "bad_request", "body needs a 'kb' field")
        session = start_session(str(requirement or ""), kb_id, catalog)
        with store.lock(session.id):
            store.save(session.snapshot())
        return _session_view(session)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return _session_view(load_session(session_id))

    @app.get("/sessions/{session_id}/question")
    def next_question(session_id: str):
        with store.lock(session_id):
            session = load_session(session_id)
            question = session.next_question()
            store.save(session.snapshot())
        if question is None:
            return {"question": None, "state": session.state.value}
        return {
            "question": {
                "property": question.property_id,
                "text": question.text,
                "description": question.description,
                "options": list(question.options),
                "impact_preview": dict(question.impact_preview),
            },
            "state": session.state.value,
        }

    @app.post("/sessions/{session_id}/answers")
    def answer(session_id: str, body: dict):
        prop = body.get("property")
        value = body.get("value")
        if not isinstance(prop, str) or not isinstance(value, str):
            return _error_response(400, "bad_request", "body needs 'property' and 'value' fields")
        with store.lock(session_id):
            session = load_session(session_id)
            outcome = session.answer(prop, value)
            store.save(session.snapshot())
        conflict = None
        if outcome.conflict is not None:
            conflict = {
                "conflict": [[p, v] for p, v in outcome.conflict.conflict],
                "messages": dict(outcome.conflict.filter_messages),
                "unconditional": list(outcome.conflict.unconditional),
            }
        return {
            "accepted": outcome.accepted,
            "feasible_count": outcome.feasible_count,
            "conflict": conflict,
            "state": session.state.value,
        }

    @app.delete("/sessions/{session_id}/answers/{property_id}")
    def retract(session_id: str, property_id: str):
        with store.lock(session_id):
            session = load_session(session_id)
            session.retract(property_id)
            store.save(session.snapshot())
        return {"state": session.state.value, "feasible_count": session.feasible_count()}

    @app.post("/sessions/{session_id}/assistant")
    def assistant_ask(session_id: str, body: dict):
        question = body.get("question")
        if not isinstance(question, str):
            return _error_response(400, "bad_request", "body needs a 'question' field")
        with store.lock(session_id):
            session = load_session(session_id)
            exchange = ask(session, question, assistant)
            store.save(session.snapshot())
        return exchange.to_dict()

    @app.get("/sessions/{session_id}/recommendations")
    def recommendations(session_id: str):
        with store.lock(session_id):
            session = load_session(session_id)
            if session.state is SessionState.CONFLICTED:
                raise errors.EmptyFeasibleSetError(
                    "no pattern is feasible; retract one of the conflicting answers"
                )
            payload = session.recommendations()
            store.save(session.snapshot())
        # Canonical bytes: identical to `patrec recommend --json` for the same inputs.
        return Response(content=payload_json_bytes(payload), media_type="application/json")

    @app.post("/sessions/{session_id}/selection")
    def select(session_id: str, body: dict):
        pattern = body.get("pattern")
        if not isinstance(pattern, str):
            return _error_response(400, "bad_request", "body needs a 'pattern' field")
        with store.lock(session_id):
            session = load_session(session_id)
            session.select_pattern(pattern)
            store.save(session.snapshot())
        return _session_view(session)

    return app
