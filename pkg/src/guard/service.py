"""Session-oriented HTTP service around the assessment pipeline.

Sessions move created -> intake_ready -> running -> complete/failed, with an
explicit reset edge from running back to intake_ready. Every session lives in
its own directory under the store root and is written with atomic renames, so
a restart between stages leaves it readable in its last persisted state.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, ValidationError

from .dynamic import (
    HttpSearchClient,
    RecordingSearchClient,
    ReplaySearchClient,
    SearchClient,
    replay_search_client_from_file,
)
from .errors import (
    BelowThresholdError,
    GuardError,
    UnknownQuestionError,
    AnswerKindMismatchError,
    UnknownSessionError,
    WrongSessionStateError,
)
from .gateway import (
    Backend,
    HttpChatBackend,
    InferenceGateway,
    RecordingBackend,
    replay_backend_from_file,
)
from .intake import (
    DEFAULT_MIN_COMPLETENESS,
    UseCaseBrief,
    UseCaseProfile,
    generate_intake_questions,
    new_profile,
    profile_completeness,
    record_answer,
)
from .pipeline import STAGES, PipelineConfig, run_pipeline
from .register import RiskRegister, load_default_band_config
from .report import parse_report, render_report
from .runlog import RunLog
from .taxonomy import TaxonomyRegistry, load_default_taxonomy
from ._util import Clock, fixed_clock, utc_now

logger = logging.getLogger(__name__)

INFERENCE_TRANSCRIPT = "inference.jsonl"
SEARCH_TRANSCRIPT = "search.jsonl"


class SessionState(str, Enum):
    CREATED = "created"
    INTAKE_READY = "intake_ready"
    RUNNING = "running"
    COMPLETE = "complete"
    FAILED = "failed"


class AssessmentSession(BaseModel):
    model_config = ConfigDict(frozen=True)

    session_id: str
    state: SessionState
    profile: UseCaseProfile
    risk_register: Optional[RiskRegister] = None
    report_id: Optional[str] = None
    error: Optional[str] = None
    intake_degraded: bool = False
    created_at: datetime
    updated_at: datetime


class SessionStore:
    """Directory-backed persistence: one directory per session, atomic writes."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _session_dir(self, session_id: str) -> Path:
        if not session_id or "/" in session_id or session_id.startswith("."):
            raise UnknownSessionError(f"unknown session {session_id!r}")
        return self.root / session_id

    def _atomic_write(self, path: Path, data: bytes) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def save_session(self, session: AssessmentSession) -> None:
        data = json.dumps(
            session.model_dump(mode="json"), ensure_ascii=False, indent=2
        ).encode("utf-8")
        self._atomic_write(self._session_dir(session.session_id) / "session.json", data)

    def load_session(self, session_id: str) -> AssessmentSession:
        path = self._session_dir(session_id) / "session.json"
        if not path.exists():
            raise UnknownSessionError(f"unknown session {session_id!r}")
        return AssessmentSession.model_validate(
            json.loads(path.read_text(encoding="utf-8"))
        )

    def list_sessions(self) -> list[AssessmentSession]:
        sessions = []
        for entry in self.root.iterdir():
            if entry.is_dir() and (entry / "session.json").exists():
                sessions.append(self.load_session(entry.name))
        return sorted(sessions, key=lambda s: (s.created_at, s.session_id))

    def save_report(self, session_id: str, report_bytes: bytes) -> None:
        self._atomic_write(self._session_dir(session_id) / "report.json", report_bytes)

    def load_report(self, session_id: str) -> bytes:
        path = self._session_dir(session_id) / "report.json"
        if not path.exists():
            raise UnknownSessionError(f"no report stored for session {session_id!r}")
        return path.read_bytes()

    def save_checkpoint(self, session_id: str, stage: str, payload: dict) -> None:
        data = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        self._atomic_write(
            self._session_dir(session_id) / "checkpoints" / f"{stage}.json", data
        )


@dataclass
class ServiceConfig:
    store_dir: str
    replay_dir: Optional[str] = None
    record_dir: Optional[str] = None
    static_dir: Optional[str] = None
    min_completeness: float = DEFAULT_MIN_COMPLETENESS
    max_parallel: int = 8
    llm_rerank: bool = False


class AssessmentService:
    """State machine and job runner; the HTTP layer is a thin wrapper."""

    def __init__(
        self,
        config: ServiceConfig,
        *,
        registry: TaxonomyRegistry | None = None,
        backend: Backend | None = None,
        search_client: SearchClient | None = None,
    ):
        self.config = config
        self.store = SessionStore(config.store_dir)
        self.registry = registry if registry is not None else load_default_taxonomy()
        self._backend = backend
        self._search_client = search_client
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self._jobs: dict[str, threading.Thread] = {}
        self.clock: Clock = fixed_clock() if config.replay_dir else utc_now

    # -- backend wiring ---------------------------------------------------

    def _resolve_backend(self) -> Backend:
        if self._backend is not None:
            backend = self._backend
        elif self.config.replay_dir:
            backend = replay_backend_from_file(
                Path(self.config.replay_dir) / INFERENCE_TRANSCRIPT
            )
        else:
            backend = HttpChatBackend()
        if self.config.record_dir:
            backend = RecordingBackend(
                backend, Path(self.config.record_dir) / INFERENCE_TRANSCRIPT
            )
        return backend

    def _resolve_search_client(self) -> SearchClient:
        if self._search_client is not None:
            client = self._search_client
        elif self.config.replay_dir:
            path = Path(self.config.replay_dir) / SEARCH_TRANSCRIPT
            client = (
                replay_search_client_from_file(path)
                if path.exists()
                else ReplaySearchClient({})
            )
        else:
            client = HttpSearchClient()
        if self.config.record_dir:
            client = RecordingSearchClient(
                client, Path(self.config.record_dir) / SEARCH_TRANSCRIPT
            )
        return client

    def _gateway(self) -> InferenceGateway:
        return InferenceGateway(
            self._resolve_backend(), max_in_flight=self.config.max_parallel
        )

    def _lock_for(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.Lock())

    # -- operations ---------------------------------------------------------

    def create_session(self, title: str, description: str) -> AssessmentSession:
        brief = UseCaseBrief(title=title, description=description)
        session_id = uuid.uuid4().hex
        now = self.clock()
        log = RunLog()
        session = AssessmentSession(
            session_id=session_id,
            state=SessionState.CREATED,
            profile=new_profile(brief, []),
            created_at=now,
            updated_at=now,
        )
        self.store.save_session(session)
        try:
            questions = generate_intake_questions(brief, self._gateway(), log=log)
        except Exception as exc:  # backend wiring problems degrade to baseline
            logger.warning("questionnaire generation degraded: %s", exc)
            log.add("intake", f"questionnaire generation failed: {type(exc).__name__}")
            questions = generate_intake_questions(brief, None)
        session = session.model_copy(
            update={
                "state": SessionState.INTAKE_READY,
                "profile": new_profile(brief, questions),
                "intake_degraded": log.degraded,
                "updated_at": self.clock(),
            }
        )
        self.store.save_session(session)
        return session

    def get_session(self, session_id: str) -> AssessmentSession:
        return self.store.load_session(session_id)

    def submit_answers(
        self, session_id: str, answers: dict[str, str | list[str]]
    ) -> AssessmentSession:
        with self._lock_for(session_id):
            session = self.store.load_session(session_id)
            if session.state != SessionState.INTAKE_READY:
                raise WrongSessionStateError(session.state.value, "submit answers")
            profile = session.profile
            for question_id, value in answers.items():
                profile = record_answer(
                    profile, question_id, value, answered_at=self.clock()
                )
            session = session.model_copy(
                update={"profile": profile, "updated_at": self.clock()}
            )
            self.store.save_session(session)
            return session

    def reset(self, session_id: str) -> AssessmentSession:
        """Explicit running -> intake_ready edge (e.g. after a crashed job)."""
        with self._lock_for(session_id):
            session = self.store.load_session(session_id)
            if session.state != SessionState.RUNNING:
                raise WrongSessionStateError(session.state.value, "reset")
            session = session.model_copy(
                update={"state": SessionState.INTAKE_READY, "updated_at": self.clock()}
            )
            self.store.save_session(session)
            return session

    def run_assessment(self, session_id: str, force: bool = False) -> AssessmentSession:
        """Start (or join) the assessment job for a session.

        Re-invocation while the job is running returns the in-progress
        session unchanged.
        """
        with self._lock_for(session_id):
            session = self.store.load_session(session_id)
            if session.state == SessionState.RUNNING:
                return session
            if session.state != SessionState.INTAKE_READY:
                raise WrongSessionStateError(session.state.value, "run assessment")
            completeness, _ = profile_completeness(session.profile)
            if completeness < self.config.min_completeness and not force:
                raise BelowThresholdError(completeness, self.config.min_completeness)
            session = session.model_copy(
                update={"state": SessionState.RUNNING, "updated_at": self.clock()}
            )
            self.store.save_session(session)

        thread = threading.Thread(
            target=self._run_job, args=(session_id, force), daemon=True
        )
        self._jobs[session_id] = thread
        thread.start()
        return session

    def _run_job(self, session_id: str, force: bool) -> None:
        last_completed: list[str] = []

        def _checkpoint(stage: str, payload: dict) -> None:
            last_completed.append(stage)
            self.store.save_checkpoint(session_id, stage, payload)

        try:
            session = self.store.load_session(session_id)
            cfg = PipelineConfig(
                min_completeness=self.config.min_completeness,
                force=force,
                max_parallel=self.config.max_parallel,
                llm_rerank=self.config.llm_rerank,
                band_config=load_default_band_config(),
            )
            log = RunLog()
            if session.intake_degraded:
                log.add("intake", "questionnaire degraded to baseline at session creation")
            outcome = run_pipeline(
                session.profile,
                self.registry,
                self._gateway(),
                self._resolve_search_client(),
                cfg,
                clock=self.clock,
                checkpoint=_checkpoint,
                log=log,
            )
            report_bytes = render_report(outcome.report, "structured")
            with self._lock_for(session_id):
                session = self.store.load_session(session_id)
                if session.state != SessionState.RUNNING:
                    # an explicit reset happened mid-run; discard the result
                    logger.info("session %s no longer running; job result dropped", session_id)
                    return
                self.store.save_report(session_id, report_bytes)
                session = session.model_copy(
                    update={
                        "state": SessionState.COMPLETE,
                        "profile": outcome.profile,
                        "risk_register": outcome.risk_register,
                        "report_id": outcome.report.report_id,
                        "updated_at": self.clock(),
                    }
                )
                self.store.save_session(session)
        except Exception as exc:  # noqa: BLE001 - job boundary
            failing_index = len(last_completed)
            stage = STAGES[failing_index] if failing_index < len(STAGES) else "unknown"
            logger.exception("assessment job failed at stage %s", stage)
            with self._lock_for(session_id):
                session = self.store.load_session(session_id)
                if session.state != SessionState.RUNNING:
                    return
                session = session.model_copy(
                    update={
                        "state": SessionState.FAILED,
                        "error": f"{stage}: {exc}",
                        "updated_at": self.clock(),
                    }
                )
                self.store.save_session(session)
        finally:
            self._jobs.pop(session_id, None)

    def wait_for_job(self, session_id: str, timeout: float | None = None) -> None:
        thread = self._jobs.get(session_id)
        if thread is not None:
            thread.join(timeout)

    def get_report_bytes(self, session_id: str, format: str) -> bytes:
        session = self.store.load_session(session_id)
        if session.state != SessionState.COMPLETE:
            raise WrongSessionStateError(session.state.value, "fetch report")
        stored = self.store.load_report(session_id)
        if format == "structured":
            return stored
        return render_report(parse_report(stored), format)


# --- HTTP layer -----------------------------------------------------------------


def create_app(
    config: ServiceConfig,
    *,
    registry: TaxonomyRegistry | None = None,
    backend: Backend | None = None,
    search_client: SearchClient | None = None,
):
    """Build the FastAPI application around an AssessmentService."""
    from fastapi import FastAPI, Request
    from fastapi.responses import JSONResponse, Response

    service = AssessmentService(
        config, registry=registry, backend=backend, search_client=search_client
    )
    app = FastAPI(title="guard", version="0.1.0")
    app.state.service = service

    @app.exception_handler(GuardError)
    async def _guard_error(request: Request, exc: GuardError):
        status = 500
        code = "internal"
        if isinstance(exc, UnknownSessionError):
            status, code = 404, "unknown-session"
        elif isinstance(exc, WrongSessionStateError):
            status, code = 409, "wrong-state"
        elif isinstance(exc, BelowThresholdError):
            status, code = 409, "below-threshold"
        elif isinstance(exc, (UnknownQuestionError, AnswerKindMismatchError)):
            status, code = 400, "bad-answer"
        return JSONResponse(
            status_code=status, content={"error": code, "detail": str(exc)}
        )

    def _session_body(session: AssessmentSession) -> dict:
        completeness, unanswered = profile_completeness(session.profile)
        return {
            "session": session.model_dump(mode="json"),
            "completeness": completeness,
            "unanswered": unanswered,
            "min_completeness": service.config.min_completeness,
        }

    @app.post("/assessments", status_code=201)
    async def create_assessment(body: dict):
        try:
            title = body.get("title", "")
            description = body.get("description", "")
            session = service.create_session(title, description)
        except ValidationError as exc:
            return JSONResponse(
                status_code=400,
                content={"error": "invalid-brief", "detail": str(exc)},
            )
        return _session_body(session)

    @app.get("/assessments")
    async def list_assessments():
        return {
            "sessions": [
                {
                    "session_id": s.session_id,
                    "state": s.state.value,
                    "title": s.profile.brief.title,
                    "created_at": s.created_at.isoformat(),
                }
                for s in service.store.list_sessions()
            ]
        }

    @app.get("/assessments/{session_id}")
    async def get_assessment(session_id: str):
        return _session_body(service.get_session(session_id))

    @app.post("/assessments/{session_id}/answers")
    async def post_answers(session_id: str, body: dict):
        answers = body.get("answers", {})
        session = service.submit_answers(session_id, answers)
        return _session_body(session)

    @app.post("/assessments/{session_id}/run")
    async def post_run(session_id: str, force: bool = False):
        session = service.run_assessment(session_id, force=force)
        return _session_body(session)

    @app.post("/assessments/{session_id}/reset")
    async def post_reset(session_id: str):
        return _session_body(service.reset(session_id))

    @app.get("/assessments/{session_id}/report")
    async def get_report(session_id: str, format: str = "structured"):
        data = service.get_report_bytes(session_id, format)
        media = {
            "structured": "application/json",
            "markdown": "text/markdown; charset=utf-8",
            "html": "text/html; charset=utf-8",
        }.get(format, "application/octet-stream")
        return Response(content=data, media_type=media)

    @app.get("/taxonomy")
    async def get_taxonomy():
        return service.registry.model_dump(mode="json")

    static_dir = config.static_dir
    if static_dir and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="webui")

    return app
