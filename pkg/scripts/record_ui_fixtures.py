#!/usr/bin/env python3
"""Record the UI story's API exchanges as replayable fixtures.

Drives the real service (in-process) through exactly the HTTP calls the
front end makes for the story walkthrough: boot, start a session on the
conflictable fixture catalog, answer into a conflict, retract from the
banner, finish with the high-security shared-device context, select the
top pattern, and land in the child-stage Q&A. After every mutation the
front end refreshes the session snapshot and pulls the next question,
so those reads are recorded too.

Output: frontend/tests/fixtures/story.json. Response bodies are kept as
raw text so byte-level comparisons stay meaningful. Re-run after
changing any payload shape, then re-run the frontend tests.
"""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from fastapi.testclient import TestClient  # noqa: E402

from patrec.service import ServiceConfig, create_app  # noqa: E402

OUT = ROOT / "frontend" / "tests" / "fixtures" / "story.json"

RC6_PREFIX = [
    ("sec-lev", "high"),
    ("use-lev", "high"),
    ("budget", "low"),
    ("no-users", "high"),
    ("intern-extern", "internal"),
    ("shared-device", "yes"),
]


def main() -> None:
    exchanges: list[dict] = []

    with tempfile.TemporaryDirectory() as store_dir:
        app = create_app(
            ServiceConfig(kb_dir=str(ROOT / "tests" / "fixtures"), store_dir=store_dir)
        )
        client = TestClient(app)

        def record(method: str, path: str, body=None):
            response = (
                client.request(method, path, json=body)
                if body is not None
                else client.request(method, path)
            )
            exchanges.append(
                {
                    "method": method,
                    "path": path,
                    "body": body,
                    "status": response.status_code,
                    "response": response.text,
                }
            )
            assert response.status_code in (200, 201), f"{method} {path}: {response.text}"
            return response.json()

        # App boot.
        record("GET", "/kbs")

        # Start.
        session = record(
            "POST",
            "/sessions",
            {
                "requirement": "External customers must authenticate to the loyalty portal",
                "kb": "authn-costcap",
            },
        )
        sid = session["id"]
        payload = record("GET", f"/sessions/{sid}/question")
        assert payload["question"]["property"] == "sec-lev"

        def answer(prop: str, value: str, expect_next):
            outcome = record("POST", f"/sessions/{sid}/answers", {"property": prop, "value": value})
            snapshot = record("GET", f"/sessions/{sid}")
            if snapshot["state"] == "eliciting":
                question = record("GET", f"/sessions/{sid}/question")
                got = question["question"]["property"] if question["question"] else None
                assert got == expect_next, (got, expect_next)
            return outcome, snapshot

        # The six catalog questions toward the story's context.
        for index, (prop, value) in enumerate(RC6_PREFIX):
            next_prop = RC6_PREFIX[index + 1][0] if index + 1 < len(RC6_PREFIX) else "cost-cap"
            answer(prop, value, next_prop)

        # Ask the assistant before the risky answer.
        exchange = record(
            "POST",
            f"/sessions/{sid}/assistant",
            {"question": "why would a strict cost cap be a problem?"},
        )
        assert exchange["cited_elements"], exchange

        # The conflicting answer: no question fetch follows (banner instead).
        outcome = record("POST", f"/sessions/{sid}/answers", {"property": "cost-cap", "value": "strict"})
        assert outcome["state"] == "conflicted"
        snapshot = record("GET", f"/sessions/{sid}")
        assert snapshot["conflict"], snapshot

        # One-click retract from the banner.
        record("DELETE", f"/sessions/{sid}/answers/cost-cap")
        snapshot = record("GET", f"/sessions/{sid}")
        assert snapshot["state"] == "eliciting"
        payload = record("GET", f"/sessions/{sid}/question")
        assert payload["question"]["property"] == "cost-cap"

        # The benign answer completes elicitation: question null, fetch ranking.
        record("POST", f"/sessions/{sid}/answers", {"property": "cost-cap", "value": "none"})
        record("GET", f"/sessions/{sid}")
        payload = record("GET", f"/sessions/{sid}/question")
        assert payload["question"] is None and payload["state"] == "recommending"
        recommendations = record("GET", f"/sessions/{sid}/recommendations")
        assert recommendations["recommendations"][0]["pattern"] == "biom-profile"
        record("GET", f"/sessions/{sid}")

        # Select the top pattern; it has a child catalog, so the next read is
        # the first child-stage question.
        selection = record("POST", f"/sessions/{sid}/selection", {"pattern": "biom-profile"})
        assert selection["stage"] == "sdp" and selection["state"] == "eliciting"
        assert selection["context"] == {"no-users": "high"}
        payload = record("GET", f"/sessions/{sid}/question")
        assert payload["question"]["property"] == "data-residency"

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps({"session_id": sid, "exchanges": exchanges}, indent=2) + "\n")
    print(f"recorded {len(exchanges)} exchanges -> {OUT}")


if __name__ == "__main__":
    main()
