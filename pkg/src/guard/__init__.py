"""Risk assessment engine for downstream LLM use cases.

Given a textual description of an LLM application, the engine produces a
ranked, banded risk register with governance measures and a downloadable
report. Thirty taxonomy-driven agents assess the catalog risks and a
web-search-driven agent surfaces dependency-specific issues; recorded
transcripts make whole runs reproducible offline.
"""

from .taxonomy import (
    BroadRisk,
    DimensionTag,
    LensAxis,
    RiskCategory,
    SubRisk,
    TaxonomyRegistry,
    load_default_taxonomy,
    load_taxonomy,
    risks_by_lens,
    serialize_taxonomy,
    validate_registry,
)
from .intake import (
    AnswerKind,
    IntakeAnswer,
    IntakeDimension,
    IntakeQuestion,
    NamedDependency,
    UseCaseBrief,
    UseCaseProfile,
    extract_dependencies,
    generate_intake_questions,
    new_profile,
    profile_completeness,
    record_answer,
)
from .gateway import (
    DecodingParams,
    InferenceGateway,
    InferenceRequest,
    InferenceResponse,
    PromptTemplate,
    TranscriptEntry,
    infer_structured,
    render_prompt,
    replay_backend,
    request_digest,
)
from .agents import AgentFinding, AgentSpec, build_agent_roster, run_agent, run_all_agents
from .dynamic import (
    Aspect,
    Consideration,
    DynamicFinding,
    DynamicIssue,
    SearchResult,
    assess_dynamic,
    build_queries,
    compile_top_issues,
    run_dynamic_stage,
    search,
)
from .register import (
    Band,
    MitigationAdvice,
    RiskBandConfig,
    RiskRecord,
    RiskRegister,
    band_of,
    filter_negligible,
    rerank,
    suggest_mitigations,
)
from .report import AssessmentReport, assemble_report, parse_report, render_report
from .pipeline import PipelineConfig, PipelineOutcome, run_pipeline
from .runlog import Degradation, RunLog

__version__ = "0.1.0"
