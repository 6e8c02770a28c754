"""Interactive recommendation sessions.

A session walks one architect through the full process: state a
requirement, answer the context questions one by one (watching the
feasible set shrink), resolve conflicts by retracting answers, receive
the ranked recommendations, pick a pattern, and — when the picked
pattern has a child knowledge base — repeat the whole loop one level
down for its design refinements.

State machine (self-loops allowed):

    eliciting --answer--> eliciting | conflicted
    eliciting --last question--> recommending
    conflicted --retract--> eliciting | conflicted
    recommending --recommendations--> awaiting_selection
    awaiting_selection --select--> eliciting (child stage) | done

One session is single-writer; callers must serialize operations on the
same session. Snapshots are plain JSON-able dicts (schema_version 1).
"""

from __future__ import annotations

import time
import uuid
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Optional

from .catalog import KBCatalog
from .errors import (
    ConstraintViolatedError,
    DomainValueError,
    SchemaVersionError,
    SessionStateError,
    SnapshotFormatError,
    UnknownReferenceError,
)
from .model import KnowledgeBase, PropertyKind
from .scoring import build_recommendation_payload
from .solver import ConflictDiagnosis, check_context, diagnose_conflict, feasible_patterns

__all__ = ["Stage", "SessionState", "Question", "AnswerOutcome", "Session", "start_session", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1


class Stage(Enum):
    SP = "sp"
    SDP = "sdp"


class SessionState(Enum):
    ELICITING = "eliciting"
    RECOMMENDING = "recommending"
    AWAITING_SELECTION = "awaiting_selection"
    CONFLICTED = "conflicted"
    DONE = "done"


_ALLOWED_TRANSITIONS = {
    (SessionState.ELICITING, SessionState.CONFLICTED),
    (SessionState.ELICITING, SessionState.RECOMMENDING),
    (SessionState.CONFLICTED, SessionState.ELICITING),
    (SessionState.RECOMMENDING, SessionState.AWAITING_SELECTION),
    (SessionState.AWAITING_SELECTION, SessionState.ELICITING),
    (SessionState.AWAITING_SELECTION, SessionState.DONE),
}


@dataclass(frozen=True)
class Question:
    """One elicitation step: the property to answer and what each answer would do."""

    property_id: str
    text: str
    options: tuple[str, ...]
    # value -> feasible-set size after answering it; None marks values that
    # would violate a contextual constraint.
    impact_preview: Mapping[str, Optional[int]]
    description: str = ""


@dataclass(frozen=True)
class AnswerOutcome:
    accepted: bool
    feasible_count: int
    conflict: Optional[ConflictDiagnosis] = None


def start_session(
    requirement: str,
    control_kb_id: str,
    catalog: KBCatalog,
    session_id: Optional[str] = None,
) -> "Session":
    """Open a fresh session on a control-level knowledge base.

    The requirement text is informational and may be empty; the
    knowledge base id must resolve in the catalog.
    """
    return Session(requirement, control_kb_id, catalog, session_id=session_id)


class Session:
    def __init__(
        self,
        requirement: str,
        control_kb_id: str,
        catalog: KBCatalog,
        session_id: Optional[str] = None,
        clock=time.time,
    ):
        catalog.get(control_kb_id)  # raises UnknownReferenceError
        self.id = session_id or uuid.uuid4().hex
        self.requirement = requirement
        self.catalog = catalog
        self._clock = clock
        self._control_kb_id = control_kb_id
        self._active_kb_id = control_kb_id
        self._stage = Stage.SP
        self._state = SessionState.ELICITING
        self._ctx: dict[str, str] = {}
        self._answer_log: list[dict] = []
        self._sp_context: dict[str, str] = {}
        self._selected_sp: Optional[str] = None
        self._selected_sdp: Optional[str] = None
        self._recommended: Optional[tuple[str, ...]] = None
        self._conflict: Optional[ConflictDiagnosis] = None
        self.transcript: list[dict] = []
        self._log_event("session_started", requirement=requirement, kb=control_kb_id)

    # -- introspection ------------------------------------------------------

    @property
    def state(self) -> SessionState:
        return self._state

    @property
    def stage(self) -> Stage:
        return self._stage

    @property
    def active_kb(self) -> KnowledgeBase:
        return self.catalog.get(self._active_kb_id)

    @property
    def context(self) -> dict[str, str]:
        return dict(self._ctx)

    @property
    def answer_log(self) -> tuple[dict, ...]:
        return tuple(dict(entry) for entry in self._answer_log)

    @property
    def selected_sp(self) -> Optional[str]:
        return self._selected_sp

    @property
    def selected_sdp(self) -> Optional[str]:
        return self._selected_sdp

    @property
    def conflict(self) -> Optional[ConflictDiagnosis]:
        return self._conflict

    @property
    def recommended(self) -> Optional[tuple[str, ...]]:
        return self._recommended

    def feasible_count(self) -> int:
        return len(feasible_patterns(self.active_kb, self._ctx).feasible)

    # -- elicitation --------------------------------------------------------

    def next_question(self) -> Optional[Question]:
        """First unanswered context property in declaration order.

        Returns None once everything is answered; that also moves the
        session from eliciting to recommending.
        """
        self._require_state(SessionState.ELICITING, "next_question")
        kb = self.active_kb
        for prop in kb.context_properties():
            if prop.id in self._ctx:
                continue
            preview: dict[str, Optional[int]] = {}
            for value in prop.domain:
                trial = dict(self._ctx)
                trial[prop.id] = value
                if check_context(kb, trial):
                    preview[value] = None
                else:
                    preview[value] = len(feasible_patterns(kb, trial).feasible)
            return Question(prop.id, prop.question_text or prop.id, prop.domain, preview, prop.description)
        self._transition(SessionState.RECOMMENDING)
        return None

    def answer(self, property_id: str, value: str) -> AnswerOutcome:
        """Record one answer; an answer that empties the feasible set flips
        the session into the conflicted state and carries the minimal
        diagnosis in the outcome."""
        self._require_state(SessionState.ELICITING, "answer")
        kb = self.active_kb
        prop = kb.property_decl(property_id)
        if prop is None or prop.kind is not PropertyKind.CONTEXT:
            raise UnknownReferenceError(f"unknown context property '{property_id}'")
        if value not in prop.domain:
            raise DomainValueError(
                f"value '{value}' is not in the domain of '{property_id}' ({', '.join(prop.domain)})"
            )
        if property_id in self._ctx:
            raise SessionStateError(f"'{property_id}' is already answered; retract it first")
        trial = dict(self._ctx)
        trial[property_id] = value
        violated = check_context(kb, trial)
        if violated:
            raise ConstraintViolatedError(
                f"answer violates contextual constraints: {', '.join(violated)}", violated
            )
        outcome = self._apply_answer(property_id, value, source="user")
        self._assert_conflict_invariant()
        return outcome

    def _apply_answer(self, property_id: str, value: str, source: str) -> AnswerOutcome:
        self._ctx[property_id] = value
        self._answer_log.append(
            {"property": property_id, "value": value, "at": self._now(), "source": source}
        )
        self._log_event("answered", property=property_id, value=value, source=source)
        result = feasible_patterns(self.active_kb, self._ctx)
        if result.is_empty():
            self._conflict = diagnose_conflict(self.active_kb, self._ctx)
            self._transition(SessionState.CONFLICTED)
            return AnswerOutcome(True, 0, self._conflict)
        self._conflict = None
        self._transition(SessionState.ELICITING)
        return AnswerOutcome(True, len(result.feasible))

    def retract(self, property_id: str) -> None:
        """Withdraw an answer; the feasible set is recomputed and may grow."""
        if self._state not in (SessionState.ELICITING, SessionState.CONFLICTED):
            raise SessionStateError(f"cannot retract in state '{self._state.value}'")
        if property_id not in self._ctx:
            raise SessionStateError(f"'{property_id}' is not answered")
        del self._ctx[property_id]
        self._answer_log = [e for e in self._answer_log if e["property"] != property_id]
        self._log_event("retracted", property=property_id)
        self._sync_feasibility_state()
        self._assert_conflict_invariant()

    def _sync_feasibility_state(self) -> None:
        result = feasible_patterns(self.active_kb, self._ctx)
        if result.is_empty():
            self._conflict = diagnose_conflict(self.active_kb, self._ctx)
            self._transition(SessionState.CONFLICTED)
        else:
            self._conflict = None
            self._transition(SessionState.ELICITING)

    # -- recommendation and selection ---------------------------------------

    def recommendations(self) -> dict:
        """Ranked feasible patterns with scores, contributions, descriptions
        and the exclusion audit; moves the session to awaiting_selection."""
        self._require_state(SessionState.RECOMMENDING, "recommendations")
        payload = build_recommendation_payload(self.active_kb, self._ctx)
        self._recommended = tuple(entry["pattern"] for entry in payload["recommendations"])
        self._transition(SessionState.AWAITING_SELECTION)
        self._log_event("recommended", patterns=list(self._recommended))
        return payload

    def select_pattern(self, pattern_id: str) -> None:
        """Commit to one recommended pattern.

        Selecting a pattern with a child knowledge base starts the
        design-refinement stage: fresh context, fresh questions, with
        answers for identically named properties inherited from the
        first stage (retractable like any other answer). Selecting a
        leaf pattern finishes the session.
        """
        self._require_state(SessionState.AWAITING_SELECTION, "select_pattern")
        if self._recommended is None or pattern_id not in self._recommended:
            raise SessionStateError(f"pattern '{pattern_id}' was not recommended")
        if self._stage is Stage.SP:
            self._selected_sp = pattern_id
            child = self.catalog.child_kb(self._active_kb_id, pattern_id)
            self._log_event("selected", pattern=pattern_id, stage=self._stage.value)
            if child is None:
                self._transition(SessionState.DONE)
                return
            self._sp_context = dict(self._ctx)
            self._stage = Stage.SDP
            self._active_kb_id = child.id
            self._ctx = {}
            self._answer_log = []
            self._recommended = None
            self._conflict = None
            self._transition(SessionState.ELICITING)
            self._sync_feasibility_state()
            self._log_event("stage_entered", stage=self._stage.value, kb=child.id)
            self._inherit_shared_answers(child)
            self._assert_conflict_invariant()
            return
        self._selected_sdp = pattern_id
        self._log_event("selected", pattern=pattern_id, stage=self._stage.value)
        self._transition(SessionState.DONE)

    def _inherit_shared_answers(self, child: KnowledgeBase) -> None:
        for prop in child.context_properties():
            if self._state is not SessionState.ELICITING:
                break  # an inherited answer produced a conflict; let the user resolve it
            value = self._sp_context.get(prop.id)
            if value is None or value not in prop.domain:
                continue
            trial = dict(self._ctx)
            trial[prop.id] = value
            if check_context(child, trial):
                continue
            self._apply_answer(prop.id, value, source="inherited")

    # -- assistant hook -----------------------------------------------------

    def record_exchange(self, exchange) -> None:
        self._log_event(
            "assistant",
            question=exchange.question,
            answer=exchange.answer,
            source=exchange.source,
            cited=list(exchange.cited_elements),
        )

    # -- state machine ------------------------------------------------------

    def _require_state(self, expected: SessionState, operation: str) -> None:
        if self._state is not expected:
            raise SessionStateError(
                f"{operation} requires state '{expected.value}', session is '{self._state.value}'"
            )

    def _transition(self, to: SessionState) -> None:
        if to is self._state:
            return
        if (self._state, to) not in _ALLOWED_TRANSITIONS:
            raise SessionStateError(f"illegal transition {self._state.value} -> {to.value}")
        self._state = to

    def _assert_conflict_invariant(self) -> None:
        # Defining invariant: conflicted <=> empty feasible set (while answering).
        if self._state not in (SessionState.ELICITING, SessionState.CONFLICTED):
            return
        empty = feasible_patterns(self.active_kb, self._ctx).is_empty()
        if empty != (self._state is SessionState.CONFLICTED):
            raise SessionStateError("internal error: conflicted state out of sync with feasibility")

    def _now(self) -> str:
        return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(self._clock()))

    def _log_event(self, event: str, **fields) -> None:
        entry = {"event": event, "at": self._now()}
        entry.update(fields)
        self.transcript.append(entry)

    # -- snapshots -----------------------------------------------------------

    def snapshot(self) -> dict:
        """Self-describing, JSON-able representation of the full state."""
        return {
            "schema_version": SCHEMA_VERSION,
            "id": self.id,
            "requirement": self.requirement,
            "stage": self._stage.value,
            "state": self._state.value,
            "control_kb": self._control_kb_id,
            "active_kb": self._active_kb_id,
            "selected_sp": self._selected_sp,
            "selected_sdp": self._selected_sdp,
            "context": dict(self._ctx),
            "answer_log": [dict(e) for e in self._answer_log],
            "sp_context": dict(self._sp_context),
            "recommended": list(self._recommended) if self._recommended is not None else None,
            "conflict": _conflict_to_dict(self._conflict),
            "transcript": [dict(e) for e in self.transcript],
        }

    @classmethod
    def restore(cls, snapshot: Mapping, catalog: KBCatalog) -> "Session":
        """Rebuild a session from a snapshot dict; inverse of snapshot()."""
        try:
            version = snapshot["schema_version"]
        except (TypeError, KeyError):
            raise SnapshotFormatError("snapshot has no schema_version field")
        if version != SCHEMA_VERSION:
            raise SchemaVersionError(
                f"snapshot schema_version {version} needs migration to {SCHEMA_VERSION}"
            )
        try:
            session = cls.__new__(cls)
            session.id = snapshot["id"]
            session.requirement = snapshot["requirement"]
            session.catalog = catalog
            session._clock = time.time
            session._control_kb_id = snapshot["control_kb"]
            session._active_kb_id = snapshot["active_kb"]
            session._stage = Stage(snapshot["stage"])
            session._state = SessionState(snapshot["state"])
            session._ctx = dict(snapshot["context"])
            session._answer_log = [dict(e) for e in snapshot["answer_log"]]
            session._sp_context = dict(snapshot.get("sp_context", {}))
            session._selected_sp = snapshot["selected_sp"]
            session._selected_sdp = snapshot.get("selected_sdp")
            recommended = snapshot["recommended"]
            session._recommended = tuple(recommended) if recommended is not None else None
            session._conflict = _conflict_from_dict(snapshot["conflict"])
            session.transcript = [dict(e) for e in snapshot["transcript"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise SnapshotFormatError(f"malformed snapshot: {exc}")
        catalog.get(session._control_kb_id)
        catalog.get(session._active_kb_id)
        return session


def _conflict_to_dict(conflict: Optional[ConflictDiagnosis]) -> Optional[dict]:
    if conflict is None:
        return None
    return {
        "conflict": [[prop, value] for prop, value in conflict.conflict],
        "messages": dict(conflict.filter_messages),
        "unconditional": list(conflict.unconditional),
    }


def _conflict_from_dict(data: Optional[Mapping]) -> Optional[ConflictDiagnosis]:
    if data is None:
        return None
    return ConflictDiagnosis(
        tuple((prop, value) for prop, value in data["conflict"]),
        dict(data["messages"]),
        tuple(data["unconditional"]),
    )
