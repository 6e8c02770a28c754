"""HTTP API: endpoints, error envelope, persistence, replay."""

import concurrent.futures
import json

import pytest
from fastapi.testclient import TestClient

from patrec.service import ServiceConfig, create_app

from conftest import KB_DIR


@pytest.fixture()
def client(tmp_path):
    app = create_app(ServiceConfig(kb_dir=str(KB_DIR), store_dir=str(tmp_path / "store")))
    with TestClient(app) as test_client:
        yield test_client


def create_session(client, kb="authn", requirement="users must authenticate"):
    response = client.post("/sessions", json={"requirement": requirement, "kb": kb})
    assert response.status_code == 201, response.text
    return response.json()["id"]


def drive(client, session_id, ctx):
    for prop, value in ctx.items():
        response = client.post(f"/sessions/{session_id}/answers", json={"property": prop, "value": value})
        assert response.status_code == 200, response.text
    response = client.get(f"/sessions/{session_id}/question")
    assert response.json()["question"] is None


class TestKBEndpoints:
    def test_list_kbs(self, client):
        body = client.get("/kbs").json()
        by_id = {entry["id"]: entry for entry in body}
        assert by_id["authn"]["patterns"] == 6
        assert by_id["authn"]["level"] == "control"
        assert by_id["password"]["level"] == "pattern"

    def test_kb_detail(self, client):
        body = client.get("/kbs/authn").json()
        assert len(body["properties"]) == 11
        assert len(body["pattern_definitions"]) == 6
        assert body["pattern_definitions"][0]["has_child"] is True
        assert len(body["filter_conditions"]) == 3
        assert body["warnings"] == []

    def test_unknown_kb_envelope(self, client):
        response = client.get("/kbs/nope")
        assert response.status_code == 404
        assert response.json()["error"]["code"] == "unknown_reference"


class TestSessionEndpoints:
    def test_create_session(self, client):
        response = client.post("/sessions", json={"requirement": "r", "kb": "authn"})
        assert response.status_code == 201
        body = response.json()
        assert body["state"] == "eliciting"
        assert body["feasible_count"] == 6

    def test_create_session_needs_kb(self, client):
        response = client.post("/sessions", json={"requirement": "r"})
        assert response.status_code == 400
        assert response.json()["error"]["code"] == "bad_request"

    def test_answer_flow(self, client):
        session_id = create_session(client)
        response = client.post(
            f"/sessions/{session_id}/answers", json={"property": "sec-lev", "value": "high"}
        )
        assert response.json() == {
            "accepted": True,
            "feasible_count": 5,
            "conflict": None,
            "state": "eliciting",
        }

    def test_question_endpoint(self, client):
        session_id = create_session(client)
        body = client.get(f"/sessions/{session_id}/question").json()
        assert body["question"]["property"] == "sec-lev"
        assert body["question"]["impact_preview"] == {"low": 6, "high": 5}

    def test_bad_value_envelope(self, client):
        session_id = create_session(client)
        response = client.post(
            f"/sessions/{session_id}/answers", json={"property": "sec-lev", "value": "ultra"}
        )
        assert response.status_code == 400
        assert response.json()["error"]["code"] == "domain_value"

    def test_unknown_session_envelope(self, client):
        response = client.get("/sessions/doesnotexist")
        assert response.status_code == 404
        assert response.json()["error"]["code"] == "unknown_session"

    def test_retract_endpoint(self, client):
        session_id = create_session(client)
        client.post(f"/sessions/{session_id}/answers", json={"property": "sec-lev", "value": "high"})
        response = client.delete(f"/sessions/{session_id}/answers/sec-lev")
        assert response.json() == {"state": "eliciting", "feasible_count": 6}

    def test_retract_unanswered_envelope(self, client):
        session_id = create_session(client)
        response = client.delete(f"/sessions/{session_id}/answers/sec-lev")
        assert response.status_code == 409
        assert response.json()["error"]["code"] == "session_state"

    def test_assistant_endpoint(self, client):
        session_id = create_session(client)
        response = client.post(
            f"/sessions/{session_id}/assistant", json={"question": "what does shared device mean?"}
        )
        body = response.json()
        assert body["source"] == "stub"
        assert body["cited_elements"] == ["shared-device"]

    def test_recommendations_and_selection(self, client, contexts):
        session_id = create_session(client)
        drive(client, session_id, contexts["rc6"])
        payload = client.get(f"/sessions/{session_id}/recommendations").json()
        assert payload["recommendations"][0]["pattern"] == "biom-profile"
        response = client.post(f"/sessions/{session_id}/selection", json={"pattern": "biom-profile"})
        assert response.json()["state"] == "done"

    def test_selection_descends_to_child_stage(self, client, contexts):
        session_id = create_session(client)
        drive(client, session_id, contexts["rc4"])
        client.get(f"/sessions/{session_id}/recommendations")
        body = client.post(f"/sessions/{session_id}/selection", json={"pattern": "password"}).json()
        assert body["stage"] == "sdp"
        assert body["active_kb"] == "password"
        assert body["context"] == {"no-users": "high"}

    def test_recommendations_before_elicitation_done(self, client):
        session_id = create_session(client)
        response = client.get(f"/sessions/{session_id}/recommendations")
        assert response.status_code == 409
        assert response.json()["error"]["code"] == "session_state"


class TestPersistence:
    def test_snapshot_survives_restart(self, tmp_path, contexts):
        store_dir = tmp_path / "store"
        app = create_app(ServiceConfig(kb_dir=str(KB_DIR), store_dir=str(store_dir)))
        with TestClient(app) as client:
            session_id = create_session(client)
            client.post(f"/sessions/{session_id}/answers", json={"property": "sec-lev", "value": "high"})
            before = client.get(f"/sessions/{session_id}").json()

        fresh_app = create_app(ServiceConfig(kb_dir=str(KB_DIR), store_dir=str(store_dir)))
        with TestClient(fresh_app) as client:
            after = client.get(f"/sessions/{session_id}").json()
        assert after == before

    def test_every_mutation_is_persisted_before_response(self, tmp_path):
        store_dir = tmp_path / "store"
        app = create_app(ServiceConfig(kb_dir=str(KB_DIR), store_dir=str(store_dir)))
        with TestClient(app) as client:
            session_id = create_session(client)
            client.post(f"/sessions/{session_id}/answers", json={"property": "sec-lev", "value": "high"})
            on_disk = json.loads((store_dir / f"{session_id}.json").read_text())
            assert on_disk["context"] == {"sec-lev": "high"}

    def test_corrupted_snapshot_names_file(self, tmp_path):
        store_dir = tmp_path / "store"
        app = create_app(ServiceConfig(kb_dir=str(KB_DIR), store_dir=str(store_dir)))
        with TestClient(app) as client:
            session_id = create_session(client)
            path = store_dir / f"{session_id}.json"
            path.write_text("{ not json")
            response = client.get(f"/sessions/{session_id}")
            assert response.status_code == 500
            assert response.json()["error"]["code"] == "snapshot_unreadable"
            assert session_id in response.json()["error"]["message"]

    def test_schema_version_mismatch_is_migration_error(self, tmp_path):
        store_dir = tmp_path / "store"
        app = create_app(ServiceConfig(kb_dir=str(KB_DIR), store_dir=str(store_dir)))
        with TestClient(app) as client:
            session_id = create_session(client)
            path = store_dir / f"{session_id}.json"
            snapshot = json.loads(path.read_text())
            snapshot["schema_version"] = 0
            path.write_text(json.dumps(snapshot))
            response = client.get(f"/sessions/{session_id}")
            assert response.status_code == 409
            assert response.json()["error"]["code"] == "schema_version_mismatch"

    def test_concurrent_saves_of_distinct_sessions(self, client):
        ids = [create_session(client, requirement=f"r{i}") for i in range(8)]

        def hammer(session_id):
            for value in ("high", None, "low", None):
                if value is None:
                    client.delete(f"/sessions/{session_id}/answers/sec-lev")
                else:
                    client.post(
                        f"/sessions/{session_id}/answers",
                        json={"property": "sec-lev", "value": value},
                    )
            return client.get(f"/sessions/{session_id}").status_code

        with concurrent.futures.ThreadPoolExecutor(max_workers=8) as pool:
            statuses = list(pool.map(hammer, ids))
        assert statuses == [200] * len(ids)
        for session_id in ids:
            body = client.get(f"/sessions/{session_id}").json()
            assert body["state"] == "eliciting"


class TestStartup:
    def test_unreadable_kb_dir_fails_with_diagnostic(self, tmp_path):
        from patrec.errors import ConfigError

        with pytest.raises(ConfigError, match="not readable"):
            create_app(ServiceConfig(kb_dir=str(tmp_path / "nope"), store_dir=str(tmp_path / "s")))

    def test_bad_listen_address_exits_2(self, tmp_path):
        import io

        from patrec.cli import main

        code = main(
            ["serve", "--kb-dir", str(KB_DIR), "--store-dir", str(tmp_path), "--listen", "nonsense"],
            stdin=io.StringIO(""), stdout=io.StringIO(), stderr=io.StringIO(),
        )
        assert code == 2


class TestReplay:
    def test_recorded_sequence_replays_byte_identically(self, tmp_path, contexts):
        requests = [("POST", "/sessions", {"requirement": "r", "kb": "authn"})]
        requests += [
            ("POST", "/sessions/{id}/answers", {"property": p, "value": v})
            for p, v in contexts["rc6"].items()
        ]
        requests += [("GET", "/sessions/{id}/question", None), ("GET", "/sessions/{id}/recommendations", None)]

        def run(store_dir):
            app = create_app(ServiceConfig(kb_dir=str(KB_DIR), store_dir=str(store_dir)))
            with TestClient(app) as client:
                session_id = None
                payload = None
                for method, template, body in requests:
                    url = template.replace("{id}", session_id or "")
                    response = client.request(method, url, json=body) if body else client.request(method, url)
                    assert response.status_code in (200, 201)
                    if template == "/sessions":
                        session_id = response.json()["id"]
                    if template.endswith("recommendations"):
                        payload = response.content
                return payload

        first = run(tmp_path / "one")
        second = run(tmp_path / "two")
        assert first == second

    def test_service_payload_matches_library_payload(self, client, contexts, authn_kb):
        from patrec.scoring import build_recommendation_payload, payload_json_bytes

        session_id = create_session(client)
        drive(client, session_id, contexts["rc3"])
        response = client.get(f"/sessions/{session_id}/recommendations")
        assert response.content == payload_json_bytes(
            build_recommendation_payload(authn_kb, contexts["rc3"])
        )
