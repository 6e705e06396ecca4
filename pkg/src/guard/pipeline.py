"""End-to-end assessment pipeline.

Runs the full stage sequence over a completed profile: dependency extraction,
the static agent batch, the dynamic web-search stage, compilation, banding and
elimination, reranking, mitigation advice, and report assembly. The service
and the CLI both drive this one function; a checkpoint callback lets the
service persist progress after every stage.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

from pydantic import BaseModel, ConfigDict

from . import register as register_mod
from .agents import AgentFinding, build_agent_roster, run_all_agents
from .dynamic import DynamicFinding, SearchClient, run_dynamic_stage
from .errors import BelowThresholdError
from .gateway import InferenceGateway
from .intake import (
    DEFAULT_MIN_COMPLETENESS,
    UseCaseProfile,
    extract_dependencies,
    profile_completeness,
)
from .register import (
    MitigationAdvice,
    RiskBandConfig,
    RiskRecord,
    RiskRegister,
    filter_negligible,
    rerank,
    suggest_mitigations,
)
from .report import AssessmentReport, assemble_report
from .runlog import RunLog
from .taxonomy import TaxonomyRegistry
from ._util import Clock, utc_now

logger = logging.getLogger(__name__)

STAGES = (
    "extract_dependencies",
    "static_agents",
    "dynamic_stage",
    "compile",
    "filter",
    "rerank",
    "mitigations",
    "report",
)

CheckpointFn = Callable[[str, dict], None]


@dataclass
class PipelineConfig:
    min_completeness: float = DEFAULT_MIN_COMPLETENESS
    force: bool = False
    max_parallel: int = 8
    search_top_k: int = 10
    llm_rerank: bool = False
    band_config: RiskBandConfig = field(default_factory=RiskBandConfig)


class PipelineOutcome(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    profile: UseCaseProfile
    static_findings: tuple[AgentFinding, ...]
    dynamic_findings: tuple[DynamicFinding, ...]
    risk_register: RiskRegister
    mitigations: tuple[MitigationAdvice, ...]
    eliminated: tuple[RiskRecord, ...]
    report: AssessmentReport


def run_pipeline(
    profile: UseCaseProfile,
    registry: TaxonomyRegistry,
    gw: InferenceGateway,
    search_client: SearchClient,
    cfg: PipelineConfig | None = None,
    *,
    clock: Clock = utc_now,
    checkpoint: Optional[CheckpointFn] = None,
    log: RunLog | None = None,
) -> PipelineOutcome:
    """Run every assessment stage and assemble the report.

    Raises:
        BelowThresholdError: completeness below the threshold without force.
        BackendError: the inference backend is unreachable (stage-tagged by
            the caller).
    """
    cfg = cfg or PipelineConfig()
    log = log if log is not None else RunLog()

    completeness, _ = profile_completeness(profile)
    if completeness < cfg.min_completeness and not cfg.force:
        raise BelowThresholdError(completeness, cfg.min_completeness)
    forced = cfg.force and completeness < cfg.min_completeness
    if forced:
        log.add("pipeline", "run forced below completeness threshold")

    def _checkpoint(stage: str, payload: dict) -> None:
        if checkpoint is not None:
            checkpoint(stage, payload)

    dependencies = extract_dependencies(profile, gw, log=log)
    profile = profile.model_copy(update={"dependencies": tuple(dependencies)})
    _checkpoint(
        "extract_dependencies",
        {"dependencies": [d.model_dump(mode="json") for d in dependencies]},
    )

    roster = build_agent_roster(registry)
    static_findings = run_all_agents(
        roster,
        profile,
        gw,
        max_parallel=cfg.max_parallel,
        min_completeness=cfg.min_completeness,
        force=True,  # threshold already checked above
        log=log,
    )
    _checkpoint(
        "static_agents",
        {"findings": [f.model_dump(mode="json") for f in static_findings]},
    )

    dynamic_findings = run_dynamic_stage(
        dependencies,
        profile,
        search_client,
        gw,
        top_k=cfg.search_top_k,
        max_parallel=cfg.max_parallel,
        log=log,
    )
    _checkpoint(
        "dynamic_stage",
        {"findings": [f.model_dump(mode="json") for f in dynamic_findings]},
    )

    records = register_mod.compile(
        static_findings,
        dynamic_findings,
        cfg=cfg.band_config,
        risk_names=registry.risk_names(),
    )
    _checkpoint("compile", {"records": [r.model_dump(mode="json") for r in records]})

    survivors, eliminated = filter_negligible(records, cfg.band_config)
    _checkpoint(
        "filter",
        {"survivors": len(survivors), "eliminated": len(eliminated)},
    )

    risk_register = rerank(
        survivors,
        profile,
        taxonomy_version=registry.version,
        clock=clock,
        gw=gw,
        llm_rerank=cfg.llm_rerank,
        log=log,
    )
    _checkpoint("rerank", {"register": risk_register.model_dump(mode="json")})

    if risk_register.records:
        mitigations = suggest_mitigations(
            risk_register, profile, gw, max_parallel=cfg.max_parallel, log=log
        )
    else:
        mitigations = []
    _checkpoint(
        "mitigations",
        {"mitigations": [m.model_dump(mode="json") for m in mitigations]},
    )

    report = assemble_report(
        profile,
        risk_register,
        mitigations,
        eliminated,
        band_config=cfg.band_config,
        decoding=gw.decoding.model_dump(mode="json"),
        degradations=log.sorted_entries(),
        transcript_digests=tuple(gw.used_digests),
        search_queries=tuple(_collect_queries(dependencies)),
        forced_run=forced,
        clock=clock,
    )
    _checkpoint("report", {"report_id": report.report_id})

    return PipelineOutcome(
        profile=profile,
        static_findings=tuple(static_findings),
        dynamic_findings=tuple(dynamic_findings),
        risk_register=risk_register,
        mitigations=tuple(mitigations),
        eliminated=tuple(eliminated),
        report=report,
    )


def _collect_queries(dependencies) -> list[str]:
    from .dynamic import build_queries

    queries: list[str] = []
    for dep in dependencies:
        queries.extend(build_queries(dep))
    return queries
