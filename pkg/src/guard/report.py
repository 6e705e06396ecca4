"""Assessment report assembly and rendering.

The structured rendering is versioned JSON and round-trips losslessly;
markdown is the human default and html wraps the same content. The
methodology appendix always discloses that the scoring scales and band
boundaries are configuration choices of this implementation.
"""

from __future__ import annotations

import hashlib
import html as html_mod
import json
from datetime import datetime
from typing import Optional

from pydantic import BaseModel, ConfigDict

from .errors import (
    CardinalityMismatchError,
    ReportParseError,
    UnsupportedFormatError,
    UnsupportedSchemaVersionError,
)
from .intake import UseCaseProfile, profile_completeness
from .register import MitigationAdvice, RiskBandConfig, RiskRecord, RiskRegister
from .runlog import Degradation
from ._util import Clock, canonical_json_bytes, utc_now

SCHEMA_VERSION = "1"

RENDER_FORMATS = ("structured", "markdown", "html")

METHODOLOGY_NOTE = (
    "Severity and likelihood use 1..5 integer scales and the preliminary "
    "score is their product; the five band boundaries are configuration of "
    "this implementation, not externally mandated values. Eliminated low and "
    "negligible records are retained in the appendix for auditability."
)


class ProfileSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    title: str
    description: str
    answered_dimensions: tuple[str, ...]
    completeness: float
    dependencies: tuple[str, ...] = ()
    forced_run: bool = False


class MethodologyAppendix(BaseModel):
    model_config = ConfigDict(frozen=True)

    taxonomy_version: str
    band_boundaries: tuple[int, int, int, int]
    eliminated_bands: tuple[str, ...]
    decoding: dict
    note: str = METHODOLOGY_NOTE
    degradations: tuple[dict, ...] = ()


class AssessmentReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    schema_version: str = SCHEMA_VERSION
    report_id: str
    generated_at: datetime
    profile_summary: ProfileSummary
    risk_register: RiskRegister
    mitigations: tuple[MitigationAdvice, ...]
    eliminated: tuple[RiskRecord, ...]
    methodology: MethodologyAppendix
    transcript_digests: tuple[str, ...] = ()
    search_queries: tuple[str, ...] = ()


def assemble_report(
    profile: UseCaseProfile,
    register: RiskRegister,
    mitigations: list[MitigationAdvice],
    eliminated: list[RiskRecord],
    *,
    band_config: RiskBandConfig,
    decoding: dict | None = None,
    degradations: tuple[Degradation, ...] = (),
    transcript_digests: tuple[str, ...] = (),
    search_queries: tuple[str, ...] = (),
    forced_run: bool = False,
    generated_at: datetime | None = None,
    clock: Clock = utc_now,
) -> AssessmentReport:
    """Bind profile, register, mitigations, and run metadata into a report.

    Raises:
        CardinalityMismatchError: register records and advices do not pair
            exactly one-to-one.
    """
    record_ids = sorted(record.record_id for record in register.records)
    advice_ids = sorted(advice.record_id for advice in mitigations)
    if record_ids != advice_ids:
        raise CardinalityMismatchError(
            f"register has {len(record_ids)} records but advice covers "
            f"{len(advice_ids)}"
        )
    completeness, _ = profile_completeness(profile)
    answered_dimensions = tuple(
        sorted(
            {
                question.dimension.value
                for question in profile.questionnaire
                if question.id in profile.answers
            }
        )
    )
    summary = ProfileSummary(
        title=profile.brief.title,
        description=profile.brief.description,
        answered_dimensions=answered_dimensions,
        completeness=round(completeness, 4),
        dependencies=tuple(dep.name for dep in profile.dependencies),
        forced_run=forced_run,
    )
    methodology = MethodologyAppendix(
        taxonomy_version=register.taxonomy_version,
        band_boundaries=band_config.boundaries,
        eliminated_bands=tuple(sorted(band.value for band in band_config.eliminate)),
        decoding=decoding or {},
        degradations=tuple(
            {"stage": d.stage, "detail": d.detail} for d in degradations
        ),
    )
    content_digest = hashlib.sha256(
        canonical_json_bytes(
            {
                "profile": summary.model_dump(mode="json"),
                "register": register.model_dump(mode="json"),
            }
        )
    ).hexdigest()
    return AssessmentReport(
        report_id=f"rpt-{content_digest[:16]}",
        generated_at=generated_at if generated_at is not None else clock(),
        profile_summary=summary,
        risk_register=register,
        mitigations=tuple(sorted(mitigations, key=lambda a: a.record_id)),
        eliminated=tuple(eliminated),
        methodology=methodology,
        transcript_digests=transcript_digests,
        search_queries=search_queries,
    )


def render_report(report: AssessmentReport, format: str) -> bytes:
    """Render to one of: structured, markdown, html.

    Structured rendering is lossless (``parse_report`` inverts it); the text
    formats include every record's id, name, severity, likelihood, score,
    band, and measures.
    """
    if format == "structured":
        return canonical_json_bytes(report.model_dump(mode="json"))
    if format == "markdown":
        return _render_markdown(report).encode("utf-8")
    if format == "html":
        return _render_html(report).encode("utf-8")
    raise UnsupportedFormatError(
        f"unsupported format {format!r}; expected one of {RENDER_FORMATS}"
    )


def parse_report(data: bytes) -> AssessmentReport:
    """Inverse of the structured rendering.

    Raises:
        ReportParseError: bytes are not a structured report document.
        UnsupportedSchemaVersionError: document declares a schema version
            this build cannot read.
    """
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ReportParseError(f"malformed report document: {exc}") from exc
    if not isinstance(doc, dict):
        raise ReportParseError("report document must be a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise UnsupportedSchemaVersionError(str(version))
    try:
        return AssessmentReport.model_validate(doc)
    except Exception as exc:
        raise ReportParseError(f"report document shape invalid: {exc}") from exc


def _advice_for(report: AssessmentReport, record_id: str) -> Optional[MitigationAdvice]:
    for advice in report.mitigations:
        if advice.record_id == record_id:
            return advice
    return None


def _render_markdown(report: AssessmentReport) -> str:
    summary = report.profile_summary
    lines = [
        f"# Risk assessment report: {summary.title}",
        "",
        f"Report `{report.report_id}`, generated {report.generated_at.isoformat()}.",
        "",
        "## Use case",
        "",
        summary.description,
        "",
        f"- Completeness: {summary.completeness:.0%}"
        + (" (forced run below threshold)" if summary.forced_run else ""),
        f"- Answered dimensions: {', '.join(summary.answered_dimensions) or 'none'}",
        f"- Named dependencies: {', '.join(summary.dependencies) or 'none'}",
        "",
        "## Risk register",
        "",
    ]
    if not report.risk_register.records:
        lines += [
            "No risks scored above the elimination threshold for this use case. "
            "See the eliminated records appendix for everything that was assessed.",
            "",
        ]
    else:
        lines += [
            "| # | Record | Risk | Severity | Likelihood | Score | Band |",
            "|---|--------|------|----------|------------|-------|------|",
        ]
        for index, record in enumerate(report.risk_register.records, start=1):
            lines.append(
                f"| {index} | `{record.record_id}` | {record.subject_label} "
                f"| {record.severity} | {record.likelihood} | {record.score} "
                f"| {record.band.value} |"
            )
        lines.append("")
        for record in report.risk_register.records:
            advice = _advice_for(report, record.record_id)
            lines += [
                f"### {record.record_id}: {record.subject_label}",
                "",
                f"Severity {record.severity}/5, likelihood {record.likelihood}/5, "
                f"score {record.score}, band **{record.band.value}**"
                + (" (degraded)" if record.degraded else "")
                + ".",
                "",
                record.rationale,
                "",
                "Governance measures:",
                "",
            ]
            for measure in advice.measures:
                lines.append(f"- {measure}")
            if advice.residual_note:
                lines.append(f"- Residual: {advice.residual_note}")
            if record.source_urls:
                lines.append("")
                lines.append("Sources: " + ", ".join(record.source_urls))
            lines.append("")
    lines += ["## Eliminated records appendix", ""]
    if report.eliminated:
        lines += [
            "| Record | Risk | Score | Band |",
            "|--------|------|-------|------|",
        ]
        for record in report.eliminated:
            lines.append(
                f"| `{record.record_id}` | {record.subject_label} "
                f"| {record.score} | {record.band.value} |"
            )
    else:
        lines.append("No records were eliminated.")
    lines += [
        "",
        "## Methodology",
        "",
        report.methodology.note,
        "",
        f"- Taxonomy version: {report.methodology.taxonomy_version}",
        f"- Band boundaries: {list(report.methodology.band_boundaries)}",
        f"- Eliminated bands: {', '.join(report.methodology.eliminated_bands)}",
        f"- Decoding: {json.dumps(report.methodology.decoding, sort_keys=True)}",
    ]
    if report.methodology.degradations:
        lines += ["", "Degraded stages:", ""]
        for entry in report.methodology.degradations:
            lines.append(f"- {entry['stage']}: {entry['detail']}")
    else:
        lines += ["", "No stage degradations occurred."]
    lines += [
        "",
        f"Inference request digests: {len(report.transcript_digests)}; "
        f"search queries: {len(report.search_queries)}.",
        "",
    ]
    return "\n".join(lines)


def _render_html(report: AssessmentReport) -> str:
    esc = html_mod.escape
    summary = report.profile_summary
    parts = [
        "<!DOCTYPE html>",
        '<html lang="en"><head><meta charset="utf-8"/>',
        f"<title>Risk assessment report: {esc(summary.title)}</title>",
        "<style>",
        "body{font-family:system-ui,sans-serif;max-width:60rem;margin:2rem auto;"
        "padding:0 1rem;color:#1a202c}",
        "table{border-collapse:collapse;width:100%}",
        "th,td{border:1px solid #cbd5e0;padding:0.4rem 0.6rem;text-align:left}",
        ".band-negligible{background:#e6fffa}.band-low{background:#f0fff4}",
        ".band-medium{background:#fffff0}.band-high{background:#fffaf0}",
        ".band-critical{background:#fff5f5}",
        "</style></head><body>",
        f"<h1>Risk assessment report: {esc(summary.title)}</h1>",
        f"<p>Report <code>{esc(report.report_id)}</code>, generated "
        f"{esc(report.generated_at.isoformat())}.</p>",
        "<h2>Use case</h2>",
        f"<p>{esc(summary.description)}</p>",
        "<ul>",
        f"<li>Completeness: {summary.completeness:.0%}"
        + (" (forced run below threshold)" if summary.forced_run else "")
        + "</li>",
        f"<li>Answered dimensions: {esc(', '.join(summary.answered_dimensions) or 'none')}</li>",
        f"<li>Named dependencies: {esc(', '.join(summary.dependencies) or 'none')}</li>",
        "</ul>",
        "<h2>Risk register</h2>",
    ]
    if not report.risk_register.records:
        parts.append(
            "<p>No risks scored above the elimination threshold for this use case.</p>"
        )
    else:
        parts.append(
            "<table><thead><tr><th>#</th><th>Record</th><th>Risk</th>"
            "<th>Severity</th><th>Likelihood</th><th>Score</th><th>Band</th>"
            "</tr></thead><tbody>"
        )
        for index, record in enumerate(report.risk_register.records, start=1):
            parts.append(
                f'<tr class="band-{record.band.value}"><td>{index}</td>'
                f"<td><code>{esc(record.record_id)}</code></td>"
                f"<td>{esc(record.subject_label)}</td><td>{record.severity}</td>"
                f"<td>{record.likelihood}</td><td>{record.score}</td>"
                f"<td>{esc(record.band.value)}</td></tr>"
            )
        parts.append("</tbody></table>")
        for record in report.risk_register.records:
            advice = _advice_for(report, record.record_id)
            parts += [
                f"<h3>{esc(record.record_id)}: {esc(record.subject_label)}</h3>",
                f"<p>Severity {record.severity}/5, likelihood {record.likelihood}/5, "
                f"score {record.score}, band <strong>{esc(record.band.value)}</strong>"
                + (" (degraded)" if record.degraded else "")
                + ".</p>",
                f"<p>{esc(record.rationale)}</p>",
                "<p>Governance measures:</p><ul>",
            ]
            for measure in advice.measures:
                parts.append(f"<li>{esc(measure)}</li>")
            if advice.residual_note:
                parts.append(f"<li>Residual: {esc(advice.residual_note)}</li>")
            parts.append("</ul>")
            if record.source_urls:
                parts.append(
                    "<p>Sources: " + esc(", ".join(record.source_urls)) + "</p>"
                )
    parts.append("<h2>Eliminated records appendix</h2>")
    if report.eliminated:
        parts.append(
            "<table><thead><tr><th>Record</th><th>Risk</th><th>Score</th>"
            "<th>Band</th></tr></thead><tbody>"
        )
        for record in report.eliminated:
            parts.append(
                f"<tr><td><code>{esc(record.record_id)}</code></td>"
                f"<td>{esc(record.subject_label)}</td><td>{record.score}</td>"
                f"<td>{esc(record.band.value)}</td></tr>"
            )
        parts.append("</tbody></table>")
    else:
        parts.append("<p>No records were eliminated.</p>")
    parts += [
        "<h2>Methodology</h2>",
        f"<p>{esc(report.methodology.note)}</p>",
        "<ul>",
        f"<li>Taxonomy version: {esc(report.methodology.taxonomy_version)}</li>",
        f"<li>Band boundaries: {esc(str(list(report.methodology.band_boundaries)))}</li>",
        f"<li>Eliminated bands: {esc(', '.join(report.methodology.eliminated_bands))}</li>",
        f"<li>Decoding: {esc(json.dumps(report.methodology.decoding, sort_keys=True))}</li>",
        "</ul>",
    ]
    if report.methodology.degradations:
        parts.append("<p>Degraded stages:</p><ul>")
        for entry in report.methodology.degradations:
            parts.append(f"<li>{esc(entry['stage'])}: {esc(entry['detail'])}</li>")
        parts.append("</ul>")
    else:
        parts.append("<p>No stage degradations occurred.</p>")
    parts += [
        f"<p>Inference request digests: {len(report.transcript_digests)}; "
        f"search queries: {len(report.search_queries)}.</p>",
        "</body></html>",
    ]
    return "\n".join(parts)
