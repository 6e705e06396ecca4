"""Use-case information gathering.

A profile starts from a title and free-text brief, grows a questionnaire that
covers the eleven intake dimensions (a curated baseline question per dimension
plus model-proposed follow-ups), collects answers, and finally names the
external dependencies the dynamic risk stage will investigate.
"""

from __future__ import annotations

import json
import logging
from datetime import datetime
from enum import Enum
from importlib import resources
from typing import Mapping, Sequence

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import (
    AnswerKindMismatchError,
    PreconditionError,
    UnknownQuestionError,
)
from .gateway import InferenceGateway
from .runlog import RunLog
from ._util import Clock, utc_now

logger = logging.getLogger(__name__)

MAX_TITLE_LENGTH = 200
MAX_FOLLOWUPS_PER_DIMENSION = 3
DEFAULT_MIN_COMPLETENESS = 0.6


class IntakeDimension(str, Enum):
    """The eleven information dimensions every questionnaire must cover."""

    DATA_SOURCES = "data_sources"
    MODEL_SPECIFICATIONS = "model_specifications"
    USER_DEMOGRAPHICS = "user_demographics"
    USE_CASE_OBJECTIVES = "use_case_objectives"
    LLM_CHARACTERISTICS = "llm_characteristics"
    EMBEDDING_METHODS = "embedding_methods"
    PROMPT_ENGINEERING = "prompt_engineering"
    FINE_TUNING = "fine_tuning"
    MONITORING_MODERATION = "monitoring_moderation"
    DEPLOYMENT_MODEL = "deployment_model"
    FEEDBACK_MECHANISMS = "feedback_mechanisms"


class AnswerKind(str, Enum):
    FREE_TEXT = "free_text"
    CHOICE = "choice"
    MULTI_CHOICE = "multi_choice"


class DependencyKind(str, Enum):
    TOOL = "tool"
    LIBRARY = "library"
    DATASET = "dataset"
    UTILITY = "utility"


class UseCaseBrief(BaseModel):
    model_config = ConfigDict(frozen=True)

    title: str
    description: str

    @field_validator("title")
    @classmethod
    def _title_valid(cls, value: str) -> str:
        value = value.strip()
        if not value:
            raise ValueError("title must be non-empty")
        if len(value) > MAX_TITLE_LENGTH:
            raise ValueError(f"title exceeds {MAX_TITLE_LENGTH} characters")
        return value

    @field_validator("description")
    @classmethod
    def _description_valid(cls, value: str) -> str:
        value = value.strip()
        if not value:
            raise ValueError("description must be non-empty")
        return value


class IntakeQuestion(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    dimension: IntakeDimension
    prompt: str
    answer_kind: AnswerKind = AnswerKind.FREE_TEXT
    choices: tuple[str, ...] = ()


class IntakeAnswer(BaseModel):
    model_config = ConfigDict(frozen=True)

    question_id: str
    value: str | tuple[str, ...]
    answered_at: datetime


class NamedDependency(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    kind: DependencyKind


class UseCaseProfile(BaseModel):
    """Immutable value; answer operations return updated copies."""

    model_config = ConfigDict(frozen=True)

    brief: UseCaseBrief
    questionnaire: tuple[IntakeQuestion, ...]
    answers: Mapping[str, IntakeAnswer] = Field(default_factory=dict)
    dependencies: tuple[NamedDependency, ...] = ()

    @model_validator(mode="after")
    def _answers_reference_questions(self) -> "UseCaseProfile":
        known = {question.id for question in self.questionnaire}
        orphaned = set(self.answers) - known
        if orphaned:
            raise ValueError(
                f"answers reference unknown question ids: {sorted(orphaned)}"
            )
        return self

    def question(self, question_id: str) -> IntakeQuestion:
        for question in self.questionnaire:
            if question.id == question_id:
                return question
        raise UnknownQuestionError(f"unknown question id {question_id!r}")


def load_baseline_questions() -> list[IntakeQuestion]:
    """One curated question per dimension, from the bundled config file."""
    raw = resources.files("guard.data").joinpath("questions.json").read_bytes()
    config = json.loads(raw)
    questions = []
    for dimension in IntakeDimension:
        entry = config[dimension.value]
        questions.append(
            IntakeQuestion(
                id=f"{dimension.value}.baseline",
                dimension=dimension,
                prompt=entry["prompt"],
                answer_kind=AnswerKind(entry.get("answer_kind", "free_text")),
                choices=tuple(entry.get("choices", ())),
            )
        )
    return questions


def generate_intake_questions(
    brief: UseCaseBrief,
    gw: InferenceGateway | None,
    *,
    log: RunLog | None = None,
) -> list[IntakeQuestion]:
    """Build the questionnaire for a brief.

    The static baseline set (one question per dimension) is always included,
    so every questionnaire covers all eleven dimensions. When a gateway is
    available it may append up to three brief-specific follow-ups per
    dimension; on gateway failure the baseline-only questionnaire is returned
    and the degradation is logged.
    """
    baseline = load_baseline_questions()
    if gw is None:
        return baseline
    baseline_text = "\n".join(
        f"- {q.dimension.value}: {q.prompt}" for q in baseline
    )
    try:
        response = gw.infer(
            "intake_followups",
            {
                "title": brief.title,
                "description": brief.description,
                "baseline_questions": baseline_text,
            },
        )
    except Exception as exc:  # noqa: BLE001 - any gateway failure degrades
        logger.warning("follow-up generation failed, using baseline only: %s", exc)
        if log is not None:
            log.add("intake", f"follow-up generation failed: {type(exc).__name__}")
        return baseline

    questions = list(baseline)
    for dimension in IntakeDimension:
        followups = response.payload.get(dimension.value, [])
        for index, prompt in enumerate(followups[:MAX_FOLLOWUPS_PER_DIMENSION], start=1):
            questions.append(
                IntakeQuestion(
                    id=f"{dimension.value}.followup-{index}",
                    dimension=dimension,
                    prompt=prompt,
                )
            )
    return questions


def new_profile(
    brief: UseCaseBrief, questionnaire: Sequence[IntakeQuestion]
) -> UseCaseProfile:
    ids = [q.id for q in questionnaire]
    if len(ids) != len(set(ids)):
        raise PreconditionError("questionnaire ids must be unique")
    return UseCaseProfile(brief=brief, questionnaire=tuple(questionnaire))


def _check_kind(question: IntakeQuestion, value: str | Sequence[str]) -> str | tuple[str, ...]:
    if question.answer_kind is AnswerKind.FREE_TEXT:
        if not isinstance(value, str):
            raise AnswerKindMismatchError(
                f"question {question.id!r} expects free text"
            )
        return value
    if question.answer_kind is AnswerKind.CHOICE:
        if not isinstance(value, str) or value not in question.choices:
            raise AnswerKindMismatchError(
                f"question {question.id!r} expects one of {list(question.choices)}"
            )
        return value
    # multi_choice
    if isinstance(value, str) or not all(v in question.choices for v in value):
        raise AnswerKindMismatchError(
            f"question {question.id!r} expects a subset of {list(question.choices)}"
        )
    return tuple(value)


def record_answer(
    profile: UseCaseProfile,
    question_id: str,
    value: str | Sequence[str],
    *,
    answered_at: datetime | None = None,
    clock: Clock = utc_now,
) -> UseCaseProfile:
    """Store an answer, returning the updated profile.

    Re-answering the same question overwrites the previous value; everything
    else is unchanged.

    Raises:
        UnknownQuestionError: no such question in the questionnaire.
        AnswerKindMismatchError: value does not conform to the answer kind.
    """
    question = profile.question(question_id)
    checked = _check_kind(question, value)
    answer = IntakeAnswer(
        question_id=question_id,
        value=checked,
        answered_at=answered_at if answered_at is not None else clock(),
    )
    answers = dict(profile.answers)
    answers[question_id] = answer
    return profile.model_copy(update={"answers": answers})


def profile_completeness(profile: UseCaseProfile) -> tuple[float, list[str]]:
    """Fraction answered plus unanswered ids in questionnaire order."""
    total = len(profile.questionnaire)
    if total == 0:
        return 0.0, []
    unanswered = [q.id for q in profile.questionnaire if q.id not in profile.answers]
    return (total - len(unanswered)) / total, unanswered


def profile_as_text(profile: UseCaseProfile) -> str:
    """Deterministic plain-text rendering used as prompt context."""
    lines = [
        f"Title: {profile.brief.title}",
        f"Description: {profile.brief.description}",
        "",
        "Questionnaire answers:",
    ]
    for question in profile.questionnaire:
        answer = profile.answers.get(question.id)
        if answer is None:
            continue
        value = answer.value
        if not isinstance(value, str):
            value = ", ".join(value)
        lines.append(f"[{question.id}] {question.prompt}")
        lines.append(f"    Answer: {value}")
    if profile.dependencies:
        lines.append("")
        lines.append("Named dependencies:")
        for dep in profile.dependencies:
            lines.append(f"- {dep.name} ({dep.kind.value})")
    return "\n".join(lines)


def extract_dependencies(
    profile: UseCaseProfile,
    gw: InferenceGateway,
    *,
    log: RunLog | None = None,
) -> list[NamedDependency]:
    """Name the tools, libraries, datasets, and utilities the profile mentions.

    The model proposes candidates but only names that literally occur in the
    profile text survive, which guards against hallucinated dependencies.
    Output is deduplicated case-insensitively and ordered by first mention.

    Raises:
        PreconditionError: the profile has no answers yet.
    """
    if not profile.answers:
        raise PreconditionError("profile has no answers; nothing to extract from")
    text = profile_as_text(profile)
    try:
        response = gw.infer("extract_dependencies", {"profile_text": text})
    except Exception as exc:  # noqa: BLE001 - any gateway failure degrades
        logger.warning("dependency extraction failed: %s", exc)
        if log is not None:
            log.add("intake", f"dependency extraction failed: {type(exc).__name__}")
        return []

    lowered = text.lower()
    seen: set[str] = set()
    candidates: list[tuple[int, NamedDependency]] = []
    for item in response.payload["dependencies"]:
        name = item["name"].strip()
        key = name.lower()
        position = lowered.find(key)
        if not name or position < 0 or key in seen:
            continue
        seen.add(key)
        candidates.append(
            (position, NamedDependency(name=name, kind=DependencyKind(item["kind"])))
        )
    candidates.sort(key=lambda pair: pair[0])
    return [dep for _, dep in candidates]


def profile_to_json(profile: UseCaseProfile) -> dict:
    return profile.model_dump(mode="json")


def profile_from_json(doc: dict) -> UseCaseProfile:
    return UseCaseProfile.model_validate(doc)
