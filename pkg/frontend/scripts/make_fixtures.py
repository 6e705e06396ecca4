#!/usr/bin/env python3
"""Regenerate the recorded API fixtures the UI contract tests run against.

Drives the engine's HTTP service end to end with the repository's scripted
test backends and saves the raw responses under tests/fixtures/. Run from the
repository root after any change to the engine's wire format:

    python3 frontend/scripts/make_fixtures.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(REPO_ROOT / "tests"))

from fastapi.testclient import TestClient  # noqa: E402

from guard.service import ServiceConfig, create_app  # noqa: E402

from helpers import (  # noqa: E402
    FIXTURE_BRIEF,
    ScriptedBackend,
    ScriptedSearchClient,
    fixture_answer_text,
)

FIXTURES = Path(__file__).resolve().parents[1] / "tests" / "fixtures"


def _save(name: str, data: bytes) -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    (FIXTURES / name).write_bytes(data)
    print(f"wrote {name} ({len(data)} bytes)")


def _save_json(name: str, doc) -> None:
    _save(name, json.dumps(doc, indent=2, ensure_ascii=False).encode("utf-8"))


def main() -> None:
    import tempfile

    with tempfile.TemporaryDirectory() as store:
        config = ServiceConfig(store_dir=store)
        client = TestClient(
            create_app(
                config, backend=ScriptedBackend(), search_client=ScriptedSearchClient()
            )
        )

        created = client.post(
            "/assessments",
            json={
                "title": FIXTURE_BRIEF.title,
                "description": FIXTURE_BRIEF.description,
            },
        )
        created.raise_for_status()
        envelope = created.json()
        _save_json("session_intake_ready.json", envelope)

        sid = envelope["session"]["session_id"]
        questions = [q["id"] for q in envelope["session"]["profile"]["questionnaire"]]

        partial_answers = {
            qid: fixture_answer_text(qid) for qid in questions[:3]
        }
        partial = client.post(
            f"/assessments/{sid}/answers", json={"answers": partial_answers}
        )
        _save_json("session_partial.json", partial.json())

        full_answers = {qid: fixture_answer_text(qid) for qid in questions}
        answered = client.post(
            f"/assessments/{sid}/answers", json={"answers": full_answers}
        )
        _save_json("session_answered.json", answered.json())

        client.post(f"/assessments/{sid}/run")
        client.app.state.service.wait_for_job(sid, timeout=60)
        complete = client.get(f"/assessments/{sid}")
        _save_json("session_complete.json", complete.json())

        report = client.get(f"/assessments/{sid}/report?format=structured")
        _save("report.json", report.content)

        taxonomy = client.get("/taxonomy")
        _save_json("taxonomy.json", taxonomy.json())


if __name__ == "__main__":
    main()
