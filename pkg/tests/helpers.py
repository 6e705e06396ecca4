"""Deterministic scripted backends and the shared golden fixture.

The scripted backends stand in for a live model and search API. They answer
every request the pipeline can make for the fixture use case, so wrapping
them in the recording layers produces complete transcripts that replay-based
tests (and the CLI end-to-end check) can run against offline.
"""

from __future__ import annotations

import json
import re
from datetime import datetime, timezone
from pathlib import Path

from guard.dynamic import SearchResult
from guard.gateway import InferenceRequest
from guard.intake import (
    UseCaseBrief,
    UseCaseProfile,
    generate_intake_questions,
    new_profile,
    record_answer,
)
from guard._util import slugify

ANSWERED_AT = datetime(2024, 1, 1, tzinfo=timezone.utc)

FIXTURE_BRIEF = UseCaseBrief(
    title="Clinical notes summarizer",
    description=(
        "Summarizes clinician notes into discharge summaries using the Falcon "
        "model with FAISS retrieval over hospital guidance documents."
    ),
)

FOLLOWUPS = {
    "data_sources": [
        "Which clinical systems export the notes?",
        "Is patient consent captured for secondary use?",
    ],
    "monitoring_moderation": ["Who reviews flagged summaries before release?"],
}

# relevance, severity, likelihood per broad risk id; None scores mean not applicable
AGENT_TABLE: dict[str, tuple[str, int | None, int | None]] = {
    "1.1": ("high", 4, 3),
    "1.2": ("high", 5, 4),
    "1.3": ("medium", 3, 3),
    "1.4": ("not_applicable", None, None),
    "1.5": ("low", 2, 2),
    "1.6": ("medium", 3, 4),
    "2.1": ("medium", 3, 2),
    "2.2": ("high", 4, 4),
    "2.3": ("not_applicable", None, None),
    "2.4": ("high", 4, 5),
    "2.5": ("low", 1, 3),
    "2.6": ("medium", 2, 5),
    "2.7": ("high", 3, 5),
    "3.1": ("medium", 3, 3),
    "3.2": ("high", 4, 2),
    "3.3": ("not_applicable", None, None),
    "3.4": ("medium", 2, 4),
    "3.5": ("low", 2, 3),
    "3.6": ("high", 5, 3),
    "3.7": ("high", 4, 4),
    "3.8": ("high", 5, 5),
    "3.9": ("high", 4, 3),
    "4.1": ("low", 1, 2),
    "4.2": ("not_applicable", None, None),
    "4.3": ("low", 1, 4),
    "4.4": ("medium", 3, 4),
    "4.5": ("high", 4, 4),
    "4.6": ("medium", 2, 2),
    "4.7": ("medium", 3, 5),
    "4.8": ("not_applicable", None, None),
}

RESULTS_PER_ASPECT = {"limitations": 5, "drawbacks": 3, "disadvantages": 4, "failures": 2}
ISSUES_PER_ASPECT = {"limitations": 2, "drawbacks": 1, "disadvantages": 1, "failures": 1}

ISSUE_PHRASES = {
    ("limitations", 1): "inference latency spikes under concurrent load",
    ("limitations", 2): "training corpus provenance is poorly documented",
    ("drawbacks", 1): "memory footprint grows sharply with context length",
    ("disadvantages", 1): "licensing terms restrict redistribution of outputs",
    ("failures", 1): "reported outages when batch sizes exceed capacity",
}

# relevance, severity, likelihood per (dependency lowercase, aspect, issue index)
DYNAMIC_TABLE: dict[tuple[str, str, int], tuple[str, int | None, int | None]] = {
    ("falcon", "limitations", 1): ("high", 5, 5),
    ("falcon", "limitations", 2): ("low", 2, 2),
    ("falcon", "drawbacks", 1): ("medium", 4, 3),
    ("falcon", "disadvantages", 1): ("not_applicable", None, None),
    ("falcon", "failures", 1): ("medium", 3, 3),
    ("faiss", "limitations", 1): ("high", 4, 4),
    ("faiss", "limitations", 2): ("not_applicable", None, None),
    ("faiss", "drawbacks", 1): ("low", 2, 3),
    ("faiss", "disadvantages", 1): ("medium", 3, 4),
    ("faiss", "failures", 1): ("low", 1, 1),
}

_URL_RE = re.compile(r"\((https?://[^)]+)\)")
_RECORD_RE = re.compile(r"Record (\S+): ")
_FINDING_RE = re.compile(r"finding (\d+)")


class ScriptedBackend:
    """Rule-based inference backend with schema-valid JSON replies."""

    backend_id = "scripted"

    def __init__(
        self,
        agent_table: dict | None = None,
        dynamic_table: dict | None = None,
        followups: dict | None = None,
        dependency_payload: list[dict] | None = None,
        mitigation_empty_for: set[str] | None = None,
    ):
        self.agent_table = agent_table if agent_table is not None else AGENT_TABLE
        self.dynamic_table = dynamic_table if dynamic_table is not None else DYNAMIC_TABLE
        self.followups = followups if followups is not None else FOLLOWUPS
        self.dependency_payload = (
            dependency_payload
            if dependency_payload is not None
            else [
                {"name": "Falcon", "kind": "library"},
                {"name": "FAISS", "kind": "library"},
            ]
        )
        self.mitigation_empty_for = mitigation_empty_for or set()

    def complete(self, request: InferenceRequest, prompt: str, attempt: int) -> str:
        handler = getattr(self, f"_handle_{request.template_id}", None)
        if handler is None:
            raise AssertionError(f"no scripted handler for {request.template_id!r}")
        return json.dumps(handler(dict(request.bindings)))

    def _handle_intake_followups(self, bindings: dict) -> dict:
        return self.followups

    def _handle_extract_dependencies(self, bindings: dict) -> dict:
        return {"dependencies": self.dependency_payload}

    def _handle_risk_assessment(self, bindings: dict) -> dict:
        relevance, severity, likelihood = self.agent_table[bindings["risk_id"]]
        if relevance == "not_applicable":
            return {
                "relevance": relevance,
                "rationale": f"risk {bindings['risk_id']} does not apply to this use case",
            }
        return {
            "relevance": relevance,
            "severity": severity,
            "likelihood": likelihood,
            "rationale": (
                f"risk {bindings['risk_id']} applies given the clinical context"
            ),
            "applicable_subrisks": [f"{bindings['risk_id']} facet"],
            "profile_citations": ["data_sources.baseline"],
        }

    def _handle_compile_issues(self, bindings: dict) -> dict:
        urls = _URL_RE.findall(bindings["results_text"])
        count = min(ISSUES_PER_ASPECT.get(bindings["aspect"], 1), len(urls))
        issues = []
        for index in range(1, count + 1):
            phrase = ISSUE_PHRASES.get((bindings["aspect"], index), "operational gap")
            issues.append(
                {
                    "summary": (
                        f"{bindings['dependency']} {bindings['aspect']} finding "
                        f"{index}: {phrase}"
                    ),
                    "source_urls": [urls[index - 1]],
                }
            )
        return {"issues": issues}

    def _handle_assess_dynamic_issue(self, bindings: dict) -> dict:
        match = _FINDING_RE.search(bindings["issue_summary"])
        index = int(match.group(1)) if match else 1
        key = (bindings["dependency"].lower(), bindings["aspect"], index)
        relevance, severity, likelihood = self.dynamic_table[key]
        if relevance == "not_applicable":
            return {"relevance": relevance, "rationale": "issue does not affect this use case"}
        return {
            "relevance": relevance,
            "severity": severity,
            "likelihood": likelihood,
            "rationale": f"issue matters for {bindings['dependency']} in this deployment",
        }

    def _handle_suggest_mitigations(self, bindings: dict) -> dict:
        match = _RECORD_RE.search(bindings["record_text"])
        record_id = match.group(1) if match else "unknown"
        if record_id in self.mitigation_empty_for:
            return {"measures": []}
        return {
            "measures": [
                f"Adopt a review checkpoint covering {record_id}",
                "Document the control and its owner in the runbook",
            ],
            "residual_note": "residual exposure remains until audited",
        }

    def _handle_register_rerank(self, bindings: dict) -> dict:
        ids = re.findall(r"- (\S+): ", bindings["records_text"])
        return {"record_ids": ids}


class ScriptedSearchClient:
    """Deterministic ranked results per query."""

    def __init__(self, results_per_aspect: dict | None = None):
        self.results_per_aspect = results_per_aspect or RESULTS_PER_ASPECT

    def search(self, query: str) -> list[SearchResult]:
        aspect = query.rsplit(" ", 1)[-1]
        count = self.results_per_aspect.get(aspect, 3)
        slug = slugify(query)
        return [
            SearchResult(
                query=query,
                rank=index,
                title=f"{query} report {index}",
                url=f"https://example.org/{slug}/{index}",
                snippet=f"Discussion {index} of {query} in production systems.",
            )
            for index in range(1, count + 1)
        ]


class FailingBackend:
    """Backend whose completions always fail as unreachable."""

    backend_id = "failing"

    def complete(self, request, prompt, attempt):
        from guard.errors import BackendUnreachableError

        raise BackendUnreachableError("scripted outage")


class FailingSearchClient:
    def search(self, query: str):
        raise TimeoutError("scripted search outage")


def fixture_answer_text(question_id: str) -> str:
    if question_id == "data_sources.baseline":
        return (
            "Notes come from the hospital EHR; retrieval uses a FAISS index "
            "built from internal guidance documents."
        )
    if question_id == "model_specifications.baseline":
        return "A self-hosted Falcon model served on two GPU nodes."
    return f"Documented for this deployment ({question_id})."


def build_fixture_profile(backend=None) -> UseCaseProfile:
    """Questionnaire via the scripted gateway, then every question answered."""
    from guard.gateway import InferenceGateway

    gw = InferenceGateway(backend if backend is not None else ScriptedBackend())
    questions = generate_intake_questions(FIXTURE_BRIEF, gw)
    profile = new_profile(FIXTURE_BRIEF, questions)
    for question in questions:
        profile = record_answer(
            profile, question.id, fixture_answer_text(question.id),
            answered_at=ANSWERED_AT,
        )
    return profile


def record_fixture_run(target_dir: Path) -> Path:
    """Record full transcripts for the fixture profile into target_dir.

    Writes profile.json, inference.jsonl, and search.jsonl; the directory can
    then drive fully offline replay runs (CLI and service). The questionnaire
    generation call is recorded too, so a replaying service can recreate the
    same session from the bare brief.
    """
    from guard.dynamic import RecordingSearchClient
    from guard.gateway import InferenceGateway, RecordingBackend
    from guard.pipeline import PipelineConfig, run_pipeline
    from guard.taxonomy import load_default_taxonomy

    target_dir.mkdir(parents=True, exist_ok=True)
    backend = RecordingBackend(ScriptedBackend(), target_dir / "inference.jsonl")
    profile = build_fixture_profile(backend)

    search_client = RecordingSearchClient(
        ScriptedSearchClient(), target_dir / "search.jsonl"
    )
    run_pipeline(
        profile,
        load_default_taxonomy(),
        InferenceGateway(backend),
        search_client,
        PipelineConfig(),
    )
    (target_dir / "profile.json").write_text(
        json.dumps(profile.model_dump(mode="json"), indent=2), encoding="utf-8"
    )
    return target_dir
