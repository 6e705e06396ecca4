import json

import pytest

from guard.errors import SchemaViolationError, TemplateSlotError, UnrecordedRequestError
from guard.gateway import (
    InferenceRequest,
    PromptTemplate,
    ReplayBackend,
    RecordingBackend,
    TranscriptEntry,
    extract_json,
    infer_structured,
    load_default_schemas,
    load_default_templates,
    load_transcript,
    render_prompt,
    replay_backend,
    request_digest,
)

TPL = PromptTemplate(
    id="assess",
    body="Assess {risk} for {usecase}",
    required_slots=frozenset({"risk", "usecase"}),
    output_schema_id="verdict",
)

SCHEMA = {
    "type": "object",
    "properties": {"verdict": {"type": "string"}},
    "required": ["verdict"],
    "additionalProperties": False,
}


def _request(**bindings) -> InferenceRequest:
    return InferenceRequest(
        template_id="assess",
        bindings=bindings or {"risk": "toxicity", "usecase": "chatbot"},
        output_schema_id="verdict",
    )


def _entry(request, attempt, raw):
    return TranscriptEntry(request_digest=request_digest(request, attempt), raw_text=raw)


def test_render_substitutes_every_slot():
    text = render_prompt(TPL, {"risk": "toxicity", "usecase": "a chatbot"})
    assert text == "Assess toxicity for a chatbot"


def test_render_missing_slot_names_it():
    with pytest.raises(TemplateSlotError) as excinfo:
        render_prompt(TPL, {"risk": "toxicity"})
    assert excinfo.value.slot == "usecase"


def test_render_unknown_binding_rejected():
    with pytest.raises(TemplateSlotError) as excinfo:
        render_prompt(TPL, {"risk": "x", "usecase": "y", "foo": "z"})
    assert excinfo.value.slot == "foo"


def test_digest_independent_of_binding_order_and_whitespace():
    a = _request(risk="toxicity", usecase="support   bot")
    b = InferenceRequest(
        template_id="assess",
        bindings={"usecase": "support bot", "risk": "toxicity"},
        output_schema_id="verdict",
    )
    assert request_digest(a) == request_digest(b)
    assert request_digest(a, 0) != request_digest(a, 1)


def test_replay_returns_recorded_response_byte_identical():
    request = _request()
    raw = json.dumps({"verdict": "fine"})
    backend = replay_backend([_entry(request, 0, raw)])
    response = infer_structured(
        request, backend, templates={"assess": TPL}, schemas={"verdict": SCHEMA}
    )
    assert response.raw_text == raw
    assert response.payload == {"verdict": "fine"}
    assert response.attempts_used == 1


def test_replay_is_insensitive_to_binding_key_order():
    request = _request()
    reordered = InferenceRequest(
        template_id="assess",
        bindings=dict(reversed(list(request.bindings.items()))),
        output_schema_id="verdict",
    )
    backend = replay_backend([_entry(request, 0, json.dumps({"verdict": "ok"}))])
    response = infer_structured(
        reordered, backend, templates={"assess": TPL}, schemas={"verdict": SCHEMA}
    )
    assert response.payload == {"verdict": "ok"}


def test_novel_request_raises_unrecorded():
    backend = replay_backend([])
    with pytest.raises(UnrecordedRequestError):
        infer_structured(
            _request(), backend, templates={"assess": TPL}, schemas={"verdict": SCHEMA}
        )


def test_repair_retry_uses_second_entry():
    request = _request()
    backend = replay_backend(
        [
            _entry(request, 0, "not json at all"),
            _entry(request, 1, json.dumps({"verdict": "repaired"})),
        ]
    )
    response = infer_structured(
        request, backend, templates={"assess": TPL}, schemas={"verdict": SCHEMA}
    )
    assert response.attempts_used == 2
    assert response.payload == {"verdict": "repaired"}


def test_retry_exhaustion_raises_schema_violation():
    request = _request()
    bad = json.dumps({"verdict": 7})
    backend = replay_backend([_entry(request, a, bad) for a in range(3)])
    with pytest.raises(SchemaViolationError) as excinfo:
        infer_structured(
            request, backend, templates={"assess": TPL}, schemas={"verdict": SCHEMA},
            retries=2,
        )
    assert excinfo.value.last_raw_text == bad
    assert excinfo.value.attempts == 3


def test_duplicate_transcript_digests_rejected():
    request = _request()
    with pytest.raises(ValueError):
        ReplayBackend([_entry(request, 0, "a"), _entry(request, 0, "b")])


def test_recording_round_trips_through_file(tmp_path):
    class Canned:
        backend_id = "canned"

        def complete(self, request, prompt, attempt):
            return json.dumps({"verdict": "recorded"})

    path = tmp_path / "transcript.jsonl"
    recorder = RecordingBackend(Canned(), path)
    request = _request()
    infer_structured(
        request, recorder, templates={"assess": TPL}, schemas={"verdict": SCHEMA}
    )
    entries = load_transcript(path)
    assert len(entries) == 1
    replay = ReplayBackend(entries)
    response = infer_structured(
        request, replay, templates={"assess": TPL}, schemas={"verdict": SCHEMA}
    )
    assert response.payload == {"verdict": "recorded"}


def test_extract_json_handles_fences_and_prose():
    assert extract_json('{"a": 1}') == {"a": 1}
    assert extract_json('```json\n{"a": 2}\n```') == {"a": 2}
    assert extract_json('Sure, here you go: {"a": 3} hope that helps') == {"a": 3}
    with pytest.raises(ValueError):
        extract_json("no json here")


def test_default_templates_and_schemas_are_consistent():
    templates = load_default_templates()
    schemas = load_default_schemas()
    assert templates  # non-empty
    for template in templates.values():
        assert template.slots_in_body() == template.required_slots
        assert template.output_schema_id in schemas
