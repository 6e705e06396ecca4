"""Compilation, banding, elimination, reranking, and mitigation advice.

Scored findings from the static agents and the dynamic stage become risk
records; records are banded by score, low and negligible bands are eliminated
(but retained for the report appendix), survivors are reranked into a strict
total order, and each surviving record gets governance measures.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime
from enum import Enum
from importlib import resources
from typing import Iterable, Mapping, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from .agents import AgentFinding
from .dynamic import DynamicFinding
from .errors import MalformedFindingsError, PreconditionError, ScoreRangeError, SchemaViolationError
from .gateway import InferenceGateway
from .intake import UseCaseProfile, profile_as_text
from .runlog import RunLog
from ._util import Clock, slugify, utc_now

logger = logging.getLogger(__name__)

PLACEHOLDER_MEASURE = "requires expert review"

RANKING_BASIS = (
    "score desc, severity desc, static before dynamic, record id asc"
)


class Band(str, Enum):
    NEGLIGIBLE = "negligible"
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"


BAND_ORDER = [Band.NEGLIGIBLE, Band.LOW, Band.MEDIUM, Band.HIGH, Band.CRITICAL]


class RiskBandConfig(BaseModel):
    """Four ascending thresholds partitioning scores 1..25 into five bands.

    A score at or below boundaries[i] falls into band i; anything above the
    last boundary is critical.
    """

    model_config = ConfigDict(frozen=True)

    boundaries: tuple[int, int, int, int] = (4, 9, 14, 19)
    eliminate: frozenset[Band] = frozenset({Band.NEGLIGIBLE, Band.LOW})

    @field_validator("boundaries")
    @classmethod
    def _ascending(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if not all(1 <= b <= 24 for b in value):
            raise ValueError("boundaries must lie within 1..24")
        if not all(a < b for a, b in zip(value, value[1:])):
            raise ValueError("boundaries must be strictly ascending")
        return value


def load_default_band_config() -> RiskBandConfig:
    raw = resources.files("guard.data").joinpath("bands.json").read_bytes()
    return load_band_config(raw)


def load_band_config(raw: bytes) -> RiskBandConfig:
    doc = json.loads(raw)
    return RiskBandConfig(
        boundaries=tuple(doc["boundaries"]),
        eliminate=frozenset(Band(b) for b in doc.get("eliminate", [])),
    )


class RiskRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    record_id: str
    source: str  # static_agent | dynamic_agent
    subject_id: str
    subject_label: str
    severity: int = Field(ge=1, le=5)
    likelihood: int = Field(ge=1, le=5)
    score: int = Field(ge=1, le=25)
    band: Band
    rationale: str = ""
    degraded: bool = False
    source_urls: tuple[str, ...] = ()


class RiskRegister(BaseModel):
    model_config = ConfigDict(frozen=True)

    records: tuple[RiskRecord, ...]
    ranking_basis: str = RANKING_BASIS
    taxonomy_version: str = ""
    created_at: datetime

    @field_validator("records")
    @classmethod
    def _unique_record_ids(cls, value: tuple[RiskRecord, ...]) -> tuple[RiskRecord, ...]:
        ids = [record.record_id for record in value]
        if len(ids) != len(set(ids)):
            raise ValueError("register record_ids must be unique")
        return value


class MitigationAdvice(BaseModel):
    model_config = ConfigDict(frozen=True)

    record_id: str
    measures: tuple[str, ...] = Field(min_length=1)
    residual_note: Optional[str] = None
    degraded: bool = False


def band_of(score: int, cfg: RiskBandConfig | None = None) -> Band:
    """Map a 1..25 score to its band; total and monotone.

    Raises:
        ScoreRangeError: score outside 1..25.
    """
    cfg = cfg or RiskBandConfig()
    if not isinstance(score, int) or not 1 <= score <= 25:
        raise ScoreRangeError(f"score {score!r} outside 1..25")
    for boundary, band in zip(cfg.boundaries, BAND_ORDER):
        if score <= boundary:
            return band
    return Band.CRITICAL


def compile(
    static_findings: Iterable[AgentFinding],
    dynamic_findings: Iterable[DynamicFinding],
    *,
    cfg: RiskBandConfig | None = None,
    risk_names: Mapping[str, str] | None = None,
) -> list[RiskRecord]:
    """One record per scored finding; not_applicable findings are dropped.

    Record ids are deterministic functions of source and subject, so the same
    findings always compile to the same records.

    Raises:
        MalformedFindingsError: duplicate broad risk ids among static
            findings (the upstream roster is a bijection, so duplicates mean
            malformed input).
    """
    cfg = cfg or RiskBandConfig()
    risk_names = risk_names or {}
    records: list[RiskRecord] = []

    seen_static: set[str] = set()
    for finding in static_findings:
        if finding.broad_risk_id in seen_static:
            raise MalformedFindingsError(
                f"duplicate static finding for broad risk {finding.broad_risk_id!r}"
            )
        seen_static.add(finding.broad_risk_id)
        if not finding.scored:
            continue
        records.append(
            RiskRecord(
                record_id=f"static:{finding.broad_risk_id}",
                source="static_agent",
                subject_id=finding.broad_risk_id,
                subject_label=risk_names.get(finding.broad_risk_id, finding.broad_risk_id),
                severity=finding.severity,
                likelihood=finding.likelihood,
                score=finding.preliminary_score,
                band=band_of(finding.preliminary_score, cfg),
                rationale=finding.rationale,
                degraded=finding.degraded,
            )
        )

    for finding in dynamic_findings:
        if not finding.scored:
            continue
        consideration = finding.issue.consideration
        record_id = (
            f"dynamic:{slugify(consideration.dependency.name)}:"
            f"{consideration.aspect.value}:{finding.issue.issue_rank}"
        )
        records.append(
            RiskRecord(
                record_id=record_id,
                source="dynamic_agent",
                subject_id=record_id.removeprefix("dynamic:"),
                subject_label=finding.issue.summary,
                severity=finding.severity,
                likelihood=finding.likelihood,
                score=finding.preliminary_score,
                band=band_of(finding.preliminary_score, cfg),
                rationale=finding.rationale,
                degraded=finding.degraded,
                source_urls=finding.issue.source_urls,
            )
        )
    return records


def filter_negligible(
    records: list[RiskRecord], cfg: RiskBandConfig | None = None
) -> tuple[list[RiskRecord], list[RiskRecord]]:
    """Split records into (survivors, eliminated) by the eliminate band set.

    Both lists preserve input order; eliminated records feed the report
    appendix rather than being discarded.
    """
    cfg = cfg or RiskBandConfig()
    survivors = [r for r in records if r.band not in cfg.eliminate]
    eliminated = [r for r in records if r.band in cfg.eliminate]
    return survivors, eliminated


def _rank_key(record: RiskRecord) -> tuple:
    return (
        -record.score,
        -record.severity,
        0 if record.source == "static_agent" else 1,
        record.record_id,
    )


def rerank(
    survivors: list[RiskRecord],
    profile: UseCaseProfile | None = None,
    *,
    taxonomy_version: str = "",
    created_at: datetime | None = None,
    clock: Clock = utc_now,
    gw: InferenceGateway | None = None,
    llm_rerank: bool = False,
    log: RunLog | None = None,
) -> RiskRegister:
    """Order survivors into a use-case register.

    The default comparator (score desc, severity desc, static before dynamic,
    record id asc) is a strict total order on any record set with unique ids,
    so the register is invariant under permutation of the input. The optional
    model-driven rerank hook is off by default; when enabled, a reply that is
    not an exact permutation of the record ids falls back to the deterministic
    order with a logged degradation.
    """
    ordered = sorted(survivors, key=_rank_key)
    basis = RANKING_BASIS
    if llm_rerank and gw is not None and ordered:
        records_text = "\n".join(
            f"- {r.record_id}: {r.subject_label} (score {r.score}, {r.band.value})"
            for r in ordered
        )
        try:
            response = gw.infer(
                "register_rerank",
                {
                    "profile_text": profile_as_text(profile) if profile else "",
                    "records_text": records_text,
                },
            )
            proposed = list(response.payload["record_ids"])
            if sorted(proposed) == sorted(r.record_id for r in ordered):
                by_id = {r.record_id: r for r in ordered}
                ordered = [by_id[record_id] for record_id in proposed]
                basis = "model-proposed ordering (llm_rerank)"
            else:
                if log is not None:
                    log.add("rerank", "model ordering was not a permutation; kept deterministic order")
        except Exception as exc:  # noqa: BLE001 - hook is best-effort
            logger.warning("llm rerank failed, keeping deterministic order: %s", exc)
            if log is not None:
                log.add("rerank", f"model rerank failed: {type(exc).__name__}")
    return RiskRegister(
        records=tuple(ordered),
        ranking_basis=basis,
        taxonomy_version=taxonomy_version,
        created_at=created_at if created_at is not None else clock(),
    )


def _record_text(record: RiskRecord) -> str:
    lines = [
        f"Record {record.record_id}: {record.subject_label}",
        f"Severity {record.severity}/5, likelihood {record.likelihood}/5, "
        f"score {record.score} ({record.band.value}).",
        f"Rationale: {record.rationale}",
    ]
    if record.source_urls:
        lines.append("Sources: " + ", ".join(record.source_urls))
    return "\n".join(lines)


def suggest_mitigations(
    register: RiskRegister,
    profile: UseCaseProfile,
    gw: InferenceGateway,
    *,
    max_parallel: int = 8,
    log: RunLog | None = None,
) -> list[MitigationAdvice]:
    """Exactly one advice per register record, sorted by record id.

    A record whose reply carries no measures (or fails schema validation)
    gets the placeholder measure and a degraded flag; backend transport
    failures abort the stage.

    Raises:
        PreconditionError: the register is empty.
    """
    if not register.records:
        raise PreconditionError("register is empty; nothing to mitigate")
    profile_text = profile_as_text(profile)

    def _one(record: RiskRecord) -> MitigationAdvice:
        try:
            response = gw.infer(
                "suggest_mitigations",
                {"record_text": _record_text(record), "profile_text": profile_text},
            )
        except SchemaViolationError:
            if log is not None:
                log.add("mitigation", f"schema violation for {record.record_id}")
            return MitigationAdvice(
                record_id=record.record_id,
                measures=(PLACEHOLDER_MEASURE,),
                degraded=True,
            )
        measures = tuple(response.payload["measures"])
        if not measures:
            if log is not None:
                log.add("mitigation", f"empty measures for {record.record_id}")
            return MitigationAdvice(
                record_id=record.record_id,
                measures=(PLACEHOLDER_MEASURE,),
                degraded=True,
            )
        return MitigationAdvice(
            record_id=record.record_id,
            measures=measures,
            residual_note=response.payload.get("residual_note"),
        )

    if max_parallel == 1:
        advices = [_one(record) for record in register.records]
    else:
        with ThreadPoolExecutor(max_workers=max_parallel) as pool:
            advices = list(pool.map(_one, register.records))
    return sorted(advices, key=lambda advice: advice.record_id)
