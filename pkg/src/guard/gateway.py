"""Replayable access to an LLM chat-completion backend.

Every model call in the engine goes through one path: render a registered
prompt template, submit it to a backend, parse the reply as JSON, and validate
it against a registered output schema. Invalid replies trigger bounded repair
retries. Requests are identified by a canonical digest so that a recorded
transcript can stand in for the live backend and make whole runs
deterministic.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Optional, Protocol

import jsonschema
from pydantic import BaseModel, ConfigDict, Field

from .errors import (
    BackendUnreachableError,
    SchemaViolationError,
    TemplateSlotError,
    UnrecordedRequestError,
)
from ._util import canonical_json_bytes, isoformat_utc, normalize_ws, utc_now

logger = logging.getLogger(__name__)

DEFAULT_RETRIES = 2
DEFAULT_MAX_IN_FLIGHT = 8

ENDPOINT_ENV = "GUARD_LLM_ENDPOINT"
MODEL_ENV = "GUARD_LLM_MODEL"
API_KEY_ENV = "GUARD_LLM_API_KEY"

_SLOT_PATTERN = re.compile(r"\{([a-z][a-z0-9_]*)\}")


class DecodingParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    temperature: float = Field(default=0.0, ge=0.0)
    max_tokens: int = Field(default=1024, gt=0)
    seed: Optional[int] = 0


class PromptTemplate(BaseModel):
    """A prompt body with named slots and a bound output schema."""

    model_config = ConfigDict(frozen=True)

    id: str
    version: int = 1
    body: str
    required_slots: frozenset[str]
    output_schema_id: str

    def slots_in_body(self) -> frozenset[str]:
        return frozenset(_SLOT_PATTERN.findall(self.body))


class InferenceRequest(BaseModel):
    model_config = ConfigDict(frozen=True)

    template_id: str
    bindings: Mapping[str, str]
    decoding: DecodingParams = DecodingParams()
    output_schema_id: str


class InferenceResponse(BaseModel):
    model_config = ConfigDict(frozen=True)

    raw_text: str
    payload: Any
    attempts_used: int = Field(ge=1)
    backend_id: str


class TranscriptEntry(BaseModel):
    """One recorded backend reply, keyed by attempt-aware request digest.

    The entry stores the raw backend text rather than a validated response so
    that repair-retry sequences (malformed first attempt, valid second) can be
    recorded faithfully.
    """

    model_config = ConfigDict(frozen=True)

    request_digest: str
    raw_text: str
    backend_id: str = "replay"
    recorded_at: str = ""


class Backend(Protocol):
    """Anything that can answer a rendered prompt."""

    backend_id: str

    def complete(self, request: InferenceRequest, prompt: str, attempt: int) -> str:
        """Return raw model text for the given request/attempt."""
        ...


def render_prompt(template: PromptTemplate, bindings: Mapping[str, str]) -> str:
    """Substitute every slot in the template body.

    Args:
        template: template whose body slots and required_slots agree.
        bindings: slot name to text; must cover required_slots exactly.

    Returns:
        The fully substituted prompt; no slot markers remain.

    Raises:
        TemplateSlotError: a required slot is missing or an unknown binding
            was supplied (the error names the slot).
    """
    missing = template.required_slots - set(bindings)
    if missing:
        slot = sorted(missing)[0]
        raise TemplateSlotError(f"missing binding for slot {slot!r}", slot=slot)
    unknown = set(bindings) - template.required_slots
    if unknown:
        slot = sorted(unknown)[0]
        raise TemplateSlotError(f"unknown slot {slot!r}", slot=slot)

    def _sub(match: re.Match[str]) -> str:
        return str(bindings[match.group(1)])

    rendered = _SLOT_PATTERN.sub(_sub, template.body)
    leftover = _SLOT_PATTERN.search(rendered)
    if leftover:  # a binding value itself introduced a marker
        raise TemplateSlotError(
            f"unresolved slot marker {leftover.group(0)!r} after substitution",
            slot=leftover.group(1),
        )
    return rendered


def request_digest(request: InferenceRequest, attempt: int = 0) -> str:
    """Stable hash of a canonicalized request.

    Independent of binding key order and of whitespace runs inside binding
    values; distinct per repair attempt so transcripts can store retry
    sequences.
    """
    payload = {
        "template_id": request.template_id,
        "bindings": {key: normalize_ws(value) for key, value in request.bindings.items()},
        "decoding": {
            "temperature": request.decoding.temperature,
            "max_tokens": request.decoding.max_tokens,
            "seed": request.decoding.seed,
        },
        "output_schema_id": request.output_schema_id,
        "attempt": attempt,
    }
    return hashlib.sha256(canonical_json_bytes(payload)).hexdigest()


def extract_json(text: str) -> Any:
    """Pull a JSON value out of model text.

    Tries direct parsing, then a fenced code block, then the first balanced
    object. Raises ValueError when nothing parses.
    """
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    fence = re.search(r"```(?:json)?\s*\n?(.*?)\n?```", text, re.DOTALL)
    if fence:
        try:
            return json.loads(fence.group(1).strip())
        except json.JSONDecodeError:
            pass
    depth = 0
    start = -1
    for index, char in enumerate(text):
        if char == "{":
            if depth == 0:
                start = index
            depth += 1
        elif char == "}":
            depth -= 1
            if depth == 0 and start >= 0:
                try:
                    return json.loads(text[start : index + 1])
                except json.JSONDecodeError:
                    break
    raise ValueError("no JSON value found in backend text")


def load_default_templates() -> dict[str, PromptTemplate]:
    raw = resources.files("guard.data").joinpath("templates.json").read_bytes()
    templates = {}
    for doc in json.loads(raw):
        template = PromptTemplate(
            id=doc["id"],
            version=doc.get("version", 1),
            body=doc["body"],
            required_slots=frozenset(doc["required_slots"]),
            output_schema_id=doc["output_schema_id"],
        )
        if template.slots_in_body() != template.required_slots:
            raise ValueError(
                f"template {template.id!r}: body slots "
                f"{sorted(template.slots_in_body())} != required "
                f"{sorted(template.required_slots)}"
            )
        templates[template.id] = template
    return templates


def load_default_schemas() -> dict[str, dict]:
    raw = resources.files("guard.data").joinpath("schemas.json").read_bytes()
    schemas = json.loads(raw)
    for slug, schema in schemas.items():
        jsonschema.Draft202012Validator.check_schema(schema)
    return schemas


def infer_structured(
    request: InferenceRequest,
    backend: Backend,
    *,
    templates: Mapping[str, PromptTemplate] | None = None,
    schemas: Mapping[str, dict] | None = None,
    retries: int = DEFAULT_RETRIES,
) -> InferenceResponse:
    """Run one schema-enforced inference with bounded repair retries.

    On a parse or validation failure the prompt is re-submitted with the
    error appended, up to ``retries`` times; ``attempts_used`` on the result
    is therefore at most ``retries + 1``.

    Raises:
        SchemaViolationError: output still invalid after all retries; carries
            the last raw text for diagnostics.
        BackendUnreachableError / UnrecordedRequestError: transport failures,
            propagated as-is.
    """
    templates = templates if templates is not None else load_default_templates()
    schemas = schemas if schemas is not None else load_default_schemas()
    template = templates[request.template_id]
    schema = schemas[request.output_schema_id]
    validator = jsonschema.Draft202012Validator(schema)

    prompt = render_prompt(template, request.bindings)
    last_raw = ""
    last_error = ""
    for attempt in range(retries + 1):
        raw = backend.complete(request, prompt, attempt)
        last_raw = raw
        try:
            payload = extract_json(raw)
        except ValueError as exc:
            last_error = str(exc)
        else:
            errors = sorted(validator.iter_errors(payload), key=str)
            if not errors:
                return InferenceResponse(
                    raw_text=raw,
                    payload=payload,
                    attempts_used=attempt + 1,
                    backend_id=backend.backend_id,
                )
            last_error = errors[0].message
        prompt = (
            render_prompt(template, request.bindings)
            + "\n\nThe previous reply was rejected: "
            + last_error
            + "\nReturn only a corrected JSON value."
        )
    raise SchemaViolationError(
        schema_id=request.output_schema_id,
        last_raw_text=last_raw,
        attempts=retries + 1,
        detail=last_error,
    )


# --- backends -----------------------------------------------------------------


class ReplayBackend:
    """Serves recorded responses by request digest; immutable and concurrent."""

    backend_id = "replay"

    def __init__(self, entries: list[TranscriptEntry]):
        self._by_digest: dict[str, TranscriptEntry] = {}
        for entry in entries:
            if entry.request_digest in self._by_digest:
                raise ValueError(
                    f"duplicate transcript digest {entry.request_digest}"
                )
            self._by_digest[entry.request_digest] = entry

    def complete(self, request: InferenceRequest, prompt: str, attempt: int) -> str:
        digest = request_digest(request, attempt)
        entry = self._by_digest.get(digest)
        if entry is None:
            raise UnrecordedRequestError(digest)
        return entry.raw_text

    def __len__(self) -> int:
        return len(self._by_digest)


class RecordingBackend:
    """Wraps another backend and appends every exchange to a JSONL transcript."""

    def __init__(self, inner: Backend, path: str | Path):
        self._inner = inner
        self._path = Path(path)
        self._path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self.backend_id = f"record({inner.backend_id})"

    def complete(self, request: InferenceRequest, prompt: str, attempt: int) -> str:
        raw = self._inner.complete(request, prompt, attempt)
        entry = TranscriptEntry(
            request_digest=request_digest(request, attempt),
            raw_text=raw,
            backend_id=self._inner.backend_id,
            recorded_at=isoformat_utc(utc_now()),
        )
        line = json.dumps(entry.model_dump(mode="json"), ensure_ascii=False)
        with self._lock:
            with self._path.open("a", encoding="utf-8") as handle:
                handle.write(line + "\n")
        return raw


class HttpChatBackend:
    """Live chat-completion backend over HTTP.

    Speaks the common `/chat/completions` protocol: endpoint URL, model name,
    and bearer token come from arguments or the GUARD_LLM_* environment
    variables.
    """

    def __init__(
        self,
        endpoint: str | None = None,
        model: str | None = None,
        api_key: str | None = None,
        timeout: float = 60.0,
    ):
        self.endpoint = endpoint or os.environ.get(ENDPOINT_ENV, "")
        self.model = model or os.environ.get(MODEL_ENV, "")
        self.api_key = api_key or os.environ.get(API_KEY_ENV, "")
        self.timeout = timeout
        if not self.endpoint:
            raise BackendUnreachableError(
                f"no backend endpoint configured (set {ENDPOINT_ENV})"
            )
        self.backend_id = f"http:{self.model or 'default'}"

    def complete(self, request: InferenceRequest, prompt: str, attempt: int) -> str:
        import httpx

        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": request.decoding.temperature,
            "max_tokens": request.decoding.max_tokens,
        }
        if request.decoding.seed is not None:
            body["seed"] = request.decoding.seed
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            response = httpx.post(
                self.endpoint.rstrip("/") + "/chat/completions",
                json=body,
                headers=headers,
                timeout=self.timeout,
            )
            response.raise_for_status()
            data = response.json()
            return data["choices"][0]["message"]["content"]
        except httpx.HTTPError as exc:
            raise BackendUnreachableError(f"backend request failed: {exc}") from exc
        except (KeyError, IndexError, ValueError) as exc:
            raise BackendUnreachableError(
                f"backend returned an unexpected payload: {exc}"
            ) from exc


def replay_backend(transcript: list[TranscriptEntry]) -> ReplayBackend:
    """Build a replay backend from in-memory transcript entries."""
    return ReplayBackend(transcript)


def load_transcript(path: str | Path) -> list[TranscriptEntry]:
    """Read a JSONL transcript file (one entry per line)."""
    entries = []
    text = Path(path).read_text(encoding="utf-8")
    for line in text.splitlines():
        line = line.strip()
        if line:
            entries.append(TranscriptEntry.model_validate(json.loads(line)))
    return entries


def replay_backend_from_file(path: str | Path) -> ReplayBackend:
    return ReplayBackend(load_transcript(path))


# --- gateway façade -----------------------------------------------------------


class InferenceGateway:
    """Binds a backend to the template/schema registries and tracks usage.

    Submissions are throttled by a max-in-flight semaphore; the set of request
    digests used during a run feeds the report's reproducibility appendix.
    """

    def __init__(
        self,
        backend: Backend,
        *,
        templates: Mapping[str, PromptTemplate] | None = None,
        schemas: Mapping[str, dict] | None = None,
        retries: int = DEFAULT_RETRIES,
        max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
        decoding: DecodingParams | None = None,
    ):
        self.backend = backend
        self.templates = dict(templates if templates is not None else load_default_templates())
        self.schemas = dict(schemas if schemas is not None else load_default_schemas())
        self.retries = retries
        self.decoding = decoding or DecodingParams()
        self._semaphore = threading.BoundedSemaphore(max_in_flight)
        self._digest_lock = threading.Lock()
        self._used_digests: set[str] = set()

    def infer(self, template_id: str, bindings: Mapping[str, str]) -> InferenceResponse:
        template = self.templates[template_id]
        request = InferenceRequest(
            template_id=template_id,
            bindings=dict(bindings),
            decoding=self.decoding,
            output_schema_id=template.output_schema_id,
        )
        with self._digest_lock:
            self._used_digests.add(request_digest(request, 0))
        with self._semaphore:
            return infer_structured(
                request,
                self.backend,
                templates=self.templates,
                schemas=self.schemas,
                retries=self.retries,
            )

    @property
    def used_digests(self) -> list[str]:
        with self._digest_lock:
            return sorted(self._used_digests)
