"""Session state machine, replay determinism, snapshots, stage descent."""

import json

import pytest

from patrec.catalog import KBCatalog
from patrec.dsl import parse_kb
from patrec.errors import (
    DomainValueError,
    SchemaVersionError,
    SessionStateError,
    SnapshotFormatError,
    UnknownReferenceError,
)
from patrec.scoring import build_recommendation_payload, payload_json_bytes, rank
from patrec.session import SessionState, Stage, start_session
from patrec.solver import feasible_patterns

from conftest import FIXTURES, KB_DIR


@pytest.fixture()
def fresh(catalog):
    return start_session("users must authenticate", "authn", catalog)


@pytest.fixture(scope="module")
def conflict_catalog():
    return KBCatalog.from_file(FIXTURES / "authn-costcap.kb")


def answer_all(session, ctx):
    for prop, value in ctx.items():
        session.answer(prop, value)
    question = session.next_question()
    assert question is None
    return session


class TestStartSession:
    def test_fresh_session_shape(self, fresh):
        assert fresh.state is SessionState.ELICITING
        assert fresh.stage is Stage.SP
        assert fresh.context == {}
        assert len(fresh.active_kb.context_properties()) == 6
        assert fresh.feasible_count() == 6

    def test_empty_requirement_accepted(self, catalog):
        session = start_session("", "authn", catalog)
        assert session.requirement == ""

    def test_unknown_kb_rejected(self, catalog):
        with pytest.raises(UnknownReferenceError):
            start_session("x", "nope", catalog)


class TestNextQuestion:
    def test_first_question_is_first_declared(self, fresh):
        question = fresh.next_question()
        assert question.property_id == "sec-lev"
        assert question.options == ("low", "high")
        assert "security" in question.text

    def test_exhaustion_transitions_to_recommending(self, fresh, contexts):
        answer_all(fresh, contexts["rc1"])
        assert fresh.state is SessionState.RECOMMENDING

    def test_impact_preview_counts(self, fresh):
        question = fresh.next_question()
        assert question.impact_preview == {"low": 6, "high": 5}

    def test_impact_preview_shared_device_under_external(self, catalog):
        session = start_session("x", "authn", catalog)
        session.answer("intern-extern", "external")
        question = None
        while True:
            question = session.next_question()
            if question.property_id == "shared-device":
                break
            session.answer(question.property_id, question.options[0])
        assert question.impact_preview["yes"] == 3

    def test_wrong_state_rejected(self, fresh, contexts):
        answer_all(fresh, contexts["rc1"])
        fresh.recommendations()
        with pytest.raises(SessionStateError):
            fresh.next_question()


class TestAnswer:
    def test_sec_lev_high_filters_password(self, fresh):
        outcome = fresh.answer("sec-lev", "high")
        assert outcome.accepted
        assert outcome.feasible_count == 5
        assert outcome.conflict is None

    def test_out_of_domain_value(self, fresh):
        with pytest.raises(DomainValueError):
            fresh.answer("sec-lev", "ultra")

    def test_unknown_property(self, fresh):
        with pytest.raises(UnknownReferenceError):
            fresh.answer("favourite-color", "blue")

    def test_reanswer_needs_retraction(self, fresh):
        fresh.answer("sec-lev", "high")
        with pytest.raises(SessionStateError, match="retract"):
            fresh.answer("sec-lev", "low")

    def test_conflicting_sequence_sets_conflicted(self, conflict_catalog):
        session = start_session("x", "authn-costcap", conflict_catalog)
        session.answer("sec-lev", "high")
        outcome = session.answer("cost-cap", "strict")
        assert outcome.feasible_count == 0
        assert session.state is SessionState.CONFLICTED
        assert set(outcome.conflict.conflict) == {("sec-lev", "high"), ("cost-cap", "strict")}
        # Minimality: dropping either answer restores feasibility.
        for prop, value in outcome.conflict.conflict:
            reduced = {k: v for k, v in session.context.items() if k != prop}
            assert not feasible_patterns(session.active_kb, reduced).is_empty()

    def test_answering_while_conflicted_rejected(self, conflict_catalog):
        session = start_session("x", "authn-costcap", conflict_catalog)
        session.answer("sec-lev", "high")
        session.answer("cost-cap", "strict")
        with pytest.raises(SessionStateError):
            session.answer("budget", "low")


class TestRetract:
    def test_conflict_resolution(self, conflict_catalog):
        session = start_session("x", "authn-costcap", conflict_catalog)
        session.answer("sec-lev", "high")
        session.answer("cost-cap", "strict")
        session.retract("cost-cap")
        assert session.state is SessionState.ELICITING
        assert session.feasible_count() > 0
        assert session.conflict is None

    def test_retract_then_reanswer_restores_state(self, fresh):
        fresh.answer("sec-lev", "high")
        fresh.answer("use-lev", "low")
        before = (fresh.context, fresh.feasible_count(), fresh.state)
        fresh.retract("sec-lev")
        fresh.answer("sec-lev", "high")
        after = (fresh.context, fresh.feasible_count(), fresh.state)
        assert before == after

    def test_retract_unanswered(self, fresh):
        with pytest.raises(SessionStateError):
            fresh.retract("sec-lev")

    def test_answer_log_replays_to_context(self, fresh):
        fresh.answer("sec-lev", "high")
        fresh.answer("budget", "low")
        fresh.retract("sec-lev")
        fresh.answer("use-lev", "high")
        replayed = {e["property"]: e["value"] for e in fresh.answer_log}
        assert replayed == fresh.context
        assert [e["property"] for e in fresh.answer_log] == list(fresh.context)


class TestRecommendations:
    @pytest.mark.parametrize("rc,expected_top", [("rc4", "password"), ("rc6", "biom-profile")])
    def test_known_tops(self, catalog, contexts, rc, expected_top):
        session = start_session("x", "authn", catalog)
        answer_all(session, contexts[rc])
        payload = session.recommendations()
        assert payload["recommendations"][0]["pattern"] == expected_top
        assert session.state is SessionState.AWAITING_SELECTION

    def test_rc8_top_within_expected_pair(self, catalog, contexts):
        session = start_session("x", "authn", catalog)
        answer_all(session, contexts["rc8"])
        top = session.recommendations()["recommendations"][0]["pattern"]
        assert top in ("password", "biom-profile")

    def test_wrong_state(self, fresh):
        with pytest.raises(SessionStateError):
            fresh.recommendations()

    def test_session_adds_no_scoring_logic(self, catalog, contexts):
        for ctx in contexts.values():
            session = start_session("x", "authn", catalog)
            answer_all(session, ctx)
            via_session = session.recommendations()
            direct = build_recommendation_payload(catalog.get("authn"), ctx)
            assert payload_json_bytes(via_session) == payload_json_bytes(direct)

    def test_monotone_feasible_counts(self, catalog, contexts):
        for ctx in contexts.values():
            session = start_session("x", "authn", catalog)
            previous = session.feasible_count()
            for prop, value in ctx.items():
                count = session.answer(prop, value).feasible_count
                assert count <= previous
                previous = count


class TestSelectPattern:
    def select_after(self, catalog, contexts, rc, pattern):
        session = start_session("x", "authn", catalog)
        answer_all(session, contexts[rc])
        session.recommendations()
        session.select_pattern(pattern)
        return session

    def test_leaf_selection_finishes(self, catalog, contexts):
        session = self.select_after(catalog, contexts, "rc6", "biom-profile")
        assert session.state is SessionState.DONE
        assert session.selected_sp == "biom-profile"

    def test_child_selection_descends(self, catalog, contexts):
        session = self.select_after(catalog, contexts, "rc4", "password")
        assert session.state is SessionState.ELICITING
        assert session.stage is Stage.SDP
        assert session.active_kb.id == "password"
        assert session.selected_sp == "password"

    def test_shared_answers_inherited(self, catalog, contexts):
        session = self.select_after(catalog, contexts, "rc4", "password")
        # rc4 sets no-users = high; the child declares the same property.
        assert session.context == {"no-users": "high"}
        entry = session.answer_log[0]
        assert entry["source"] == "inherited"
        question = session.next_question()
        assert question.property_id == "architecture"  # the only open child question

    def test_inherited_answer_is_retractable(self, catalog, contexts):
        session = self.select_after(catalog, contexts, "rc4", "password")
        session.retract("no-users")
        assert session.context == {}

    def test_sdp_stage_completes(self, catalog, contexts):
        session = self.select_after(catalog, contexts, "rc4", "password")
        session.answer("architecture", "decentralized")
        assert session.next_question() is None
        payload = session.recommendations()
        assert [e["pattern"] for e in payload["recommendations"]] == ["password-distributed"]
        session.select_pattern("password-distributed")
        assert session.state is SessionState.DONE
        assert session.selected_sdp == "password-distributed"

    def test_selecting_unrecommended_pattern(self, catalog, contexts):
        session = start_session("x", "authn", catalog)
        answer_all(session, contexts["rc6"])
        session.recommendations()
        with pytest.raises(SessionStateError, match="not recommended"):
            session.select_pattern("password")  # excluded in rc6

    def test_selection_needs_awaiting_state(self, fresh):
        with pytest.raises(SessionStateError):
            fresh.select_pattern("password")


class TestReplayDeterminism:
    def test_rc_sessions_replay_byte_identically(self, catalog, contexts):
        for ctx in contexts.values():
            first = start_session("req", "authn", catalog)
            answer_all(first, ctx)
            original = payload_json_bytes(first.recommendations())

            replay = start_session("req", "authn", catalog)
            for entry in first.answer_log:
                replay.answer(entry["property"], entry["value"])
            assert replay.next_question() is None
            assert payload_json_bytes(replay.recommendations()) == original

    def test_replay_after_retractions(self, catalog, contexts):
        session = start_session("req", "authn", catalog)
        session.answer("sec-lev", "high")
        session.retract("sec-lev")
        for prop, value in contexts["rc6"].items():
            session.answer(prop, value)
        session.next_question()
        original = payload_json_bytes(session.recommendations())

        replay = start_session("req", "authn", catalog)
        for entry in session.answer_log:
            replay.answer(entry["property"], entry["value"])
        replay.next_question()
        assert payload_json_bytes(replay.recommendations()) == original


class TestSnapshots:
    def test_round_trip(self, catalog, contexts):
        from patrec.session import Session

        session = start_session("req", "authn", catalog)
        session.answer("sec-lev", "high")
        snapshot = session.snapshot()
        restored = Session.restore(snapshot, catalog)
        assert restored.snapshot() == snapshot
        # The restored session keeps working identically.
        assert restored.feasible_count() == session.feasible_count()

    def test_snapshot_is_json_able(self, catalog, contexts):
        session = start_session("req", "authn", catalog)
        answer_all(session, contexts["rc4"])
        session.recommendations()
        session.select_pattern("password")
        text = json.dumps(session.snapshot())
        assert "password" in text

    def test_schema_version_mismatch(self, catalog):
        session = start_session("req", "authn", catalog)
        from patrec.session import Session

        snapshot = session.snapshot()
        snapshot["schema_version"] = 99
        with pytest.raises(SchemaVersionError):
            Session.restore(snapshot, catalog)

    def test_malformed_snapshot(self, catalog):
        from patrec.session import Session

        with pytest.raises(SnapshotFormatError):
            Session.restore({"schema_version": 1, "id": "x"}, catalog)

    def test_transcript_records_events(self, catalog, contexts):
        session = start_session("req", "authn", catalog)
        answer_all(session, contexts["rc4"])
        session.recommendations()
        session.select_pattern("password")
        events = [e["event"] for e in session.transcript]
        assert events[0] == "session_started"
        assert "answered" in events
        assert "recommended" in events
        assert "selected" in events
        assert "stage_entered" in events
