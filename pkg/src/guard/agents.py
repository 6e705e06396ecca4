"""The per-broad-risk assessment agents.

One agent per broad risk in the registry. Each agent judges relevance for the
use case and, when applicable, rates severity and likelihood on 1..5 integer
scales; the preliminary score is their product (the standard 5x5 risk-matrix
convention, disclosed in the report methodology).
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import PreconditionError, SchemaViolationError
from .gateway import InferenceGateway
from .intake import DEFAULT_MIN_COMPLETENESS, UseCaseProfile, profile_as_text, profile_completeness
from .runlog import RunLog
from .taxonomy import TaxonomyRegistry
from ._util import dotted_sort_key

logger = logging.getLogger(__name__)

RELEVANCE_LEVELS = ("not_applicable", "low", "medium", "high")


class AgentSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    broad_risk_id: str
    instructions: str
    template_id: str = "risk_assessment"
    output_schema_id: str = "agent_finding"
    risk_name: str = ""
    risk_description: str = ""
    risk_lenses: str = ""


class AgentFinding(BaseModel):
    """One agent's judgment for one broad risk.

    Scores are present exactly when the risk applies; the preliminary score
    always equals severity times likelihood.
    """

    model_config = ConfigDict(frozen=True)

    broad_risk_id: str
    relevance: str
    severity: Optional[int] = Field(default=None, ge=1, le=5)
    likelihood: Optional[int] = Field(default=None, ge=1, le=5)
    preliminary_score: Optional[int] = Field(default=None, ge=1, le=25)
    rationale: str = ""
    applicable_subrisks: tuple[str, ...] = ()
    profile_citations: tuple[str, ...] = ()
    degraded: bool = False

    @model_validator(mode="after")
    def _score_closure(self) -> "AgentFinding":
        if self.relevance not in RELEVANCE_LEVELS:
            raise ValueError(f"unknown relevance {self.relevance!r}")
        scored = self.severity is not None and self.likelihood is not None
        if self.relevance == "not_applicable":
            if scored or self.preliminary_score is not None:
                raise ValueError("not_applicable findings carry no scores")
        else:
            if not scored:
                raise ValueError("applicable findings need severity and likelihood")
            if self.preliminary_score != self.severity * self.likelihood:
                raise ValueError("preliminary_score must equal severity * likelihood")
        return self

    @property
    def scored(self) -> bool:
        return self.preliminary_score is not None


def build_agent_roster(registry: TaxonomyRegistry) -> list[AgentSpec]:
    """One spec per broad risk, ordered by risk id.

    Instructions embed the risk name, description, and lens tags so each
    agent is context-aware about exactly one risk.
    """
    roster = []
    for risk in sorted(registry.broad_risks, key=lambda r: dotted_sort_key(r.id)):
        lenses = "; ".join(
            f"{tag.axis.value}: {tag.value}" for tag in risk.dimensions
        )
        instructions = (
            f"You assess risk {risk.id} ({risk.name}) for downstream LLM use cases. "
            f"{risk.description} Lenses: {lenses or 'untagged'}."
        )
        roster.append(
            AgentSpec(
                broad_risk_id=risk.id,
                instructions=instructions,
                risk_name=risk.name,
                risk_description=risk.description,
                risk_lenses=lenses or "untagged",
            )
        )
    return roster


def _degraded_finding(spec: AgentSpec, detail: str) -> AgentFinding:
    return AgentFinding(
        broad_risk_id=spec.broad_risk_id,
        relevance="not_applicable",
        rationale=f"assessment degraded: {detail}",
        degraded=True,
    )


def run_agent(
    spec: AgentSpec,
    profile: UseCaseProfile,
    gw: InferenceGateway,
    *,
    min_completeness: float = DEFAULT_MIN_COMPLETENESS,
    force: bool = False,
    log: RunLog | None = None,
) -> AgentFinding:
    """Run one agent against the profile.

    A persistent schema violation degrades to a flagged not_applicable
    finding instead of aborting the assessment; transport failures propagate
    so the batch can abort.

    Raises:
        PreconditionError: profile completeness below threshold without force.
    """
    completeness, _ = profile_completeness(profile)
    if completeness < min_completeness and not force:
        raise PreconditionError(
            f"profile completeness {completeness:.2f} below {min_completeness:.2f}"
        )
    try:
        response = gw.infer(
            "risk_assessment",
            {
                "risk_id": spec.broad_risk_id,
                "risk_name": spec.risk_name,
                "risk_description": spec.risk_description,
                "risk_lenses": spec.risk_lenses,
                "profile_text": profile_as_text(profile),
            },
        )
    except SchemaViolationError as exc:
        logger.warning("agent %s degraded: %s", spec.broad_risk_id, exc)
        if log is not None:
            log.add("risk_agents", f"agent {spec.broad_risk_id} schema violation")
        return _degraded_finding(spec, "output failed schema validation")

    payload = response.payload
    relevance = payload["relevance"]
    if relevance == "not_applicable":
        return AgentFinding(
            broad_risk_id=spec.broad_risk_id,
            relevance=relevance,
            rationale=payload["rationale"],
            applicable_subrisks=tuple(payload.get("applicable_subrisks", ())),
            profile_citations=tuple(payload.get("profile_citations", ())),
        )
    finding = AgentFinding(
        broad_risk_id=spec.broad_risk_id,
        relevance=relevance,
        severity=payload["severity"],
        likelihood=payload["likelihood"],
        preliminary_score=payload["severity"] * payload["likelihood"],
        rationale=payload["rationale"],
        applicable_subrisks=tuple(payload.get("applicable_subrisks", ())),
        profile_citations=tuple(payload.get("profile_citations", ())),
    )
    if log is not None and not finding.profile_citations:
        log.add("risk_agents", f"agent {spec.broad_risk_id} rationale cites no questions")
    return finding


def run_all_agents(
    roster: list[AgentSpec],
    profile: UseCaseProfile,
    gw: InferenceGateway,
    max_parallel: int = 8,
    *,
    min_completeness: float = DEFAULT_MIN_COMPLETENESS,
    force: bool = False,
    log: RunLog | None = None,
) -> list[AgentFinding]:
    """Run every agent, one finding per spec, sorted by broad risk id.

    Output is invariant to scheduling: the same roster and backend produce
    identical findings for any max_parallel.

    Raises:
        PreconditionError: empty roster, or completeness below threshold.
        BackendError: the backend is unreachable (aborts the whole batch).
    """
    if not roster:
        raise PreconditionError("agent roster is empty")
    completeness, _ = profile_completeness(profile)
    if completeness < min_completeness and not force:
        raise PreconditionError(
            f"profile completeness {completeness:.2f} below {min_completeness:.2f}"
        )
    if max_parallel < 1:
        raise PreconditionError("max_parallel must be at least 1")

    def _one(spec: AgentSpec) -> AgentFinding:
        return run_agent(
            spec, profile, gw,
            min_completeness=min_completeness, force=True, log=log,
        )

    if max_parallel == 1:
        findings = [_one(spec) for spec in roster]
    else:
        with ThreadPoolExecutor(max_workers=max_parallel) as pool:
            findings = list(pool.map(_one, roster))
    return sorted(findings, key=lambda f: dotted_sort_key(f.broad_risk_id))
