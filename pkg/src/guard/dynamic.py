"""Web-search-driven risk collection for profile dependencies.

For every named dependency the stage fans out four searches, one per aspect
(limitations, drawbacks, disadvantages, failures), distills at most three
issues per aspect from the ranked results, and judges each issue's contextual
relevance to the use case with the same severity/likelihood scoring the
static agents use. Search failures degrade to empty results; they never abort
an assessment.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from pathlib import Path
from typing import Optional, Protocol

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import PreconditionError, SchemaViolationError
from .gateway import InferenceGateway
from .intake import NamedDependency, UseCaseProfile, profile_as_text
from .runlog import RunLog

logger = logging.getLogger(__name__)

DEFAULT_TOP_K = 10
MAX_ISSUES_PER_CONSIDERATION = 3
DEDUP_OVERLAP_THRESHOLD = 0.8

SEARCH_ENDPOINT_ENV = "GUARD_SEARCH_ENDPOINT"
SEARCH_API_KEY_ENV = "GUARD_SEARCH_API_KEY"


class Aspect(str, Enum):
    """The four angles investigated per dependency, in fan-out order."""

    LIMITATIONS = "limitations"
    DRAWBACKS = "drawbacks"
    DISADVANTAGES = "disadvantages"
    FAILURES = "failures"


ASPECT_ORDER = {aspect: index for index, aspect in enumerate(Aspect)}


class Consideration(BaseModel):
    model_config = ConfigDict(frozen=True)

    dependency: NamedDependency
    aspect: Aspect


class SearchResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    query: str
    rank: int = Field(ge=1)
    title: str
    url: str
    snippet: str = ""


class DynamicIssue(BaseModel):
    model_config = ConfigDict(frozen=True)

    consideration: Consideration
    issue_rank: int = Field(ge=1, le=MAX_ISSUES_PER_CONSIDERATION)
    summary: str
    source_urls: tuple[str, ...] = Field(min_length=1)


class DynamicFinding(BaseModel):
    """Contextual judgment of one dependency issue; same scoring closure as
    the static agents."""

    model_config = ConfigDict(frozen=True)

    issue: DynamicIssue
    relevance: str
    severity: Optional[int] = Field(default=None, ge=1, le=5)
    likelihood: Optional[int] = Field(default=None, ge=1, le=5)
    preliminary_score: Optional[int] = Field(default=None, ge=1, le=25)
    rationale: str = ""
    degraded: bool = False

    @model_validator(mode="after")
    def _score_closure(self) -> "DynamicFinding":
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


class SearchClient(Protocol):
    def search(self, query: str) -> list[SearchResult]:
        ...


def build_queries(dep: NamedDependency) -> list[str]:
    """The four aspect queries for one dependency, in aspect order."""
    if not dep.name.strip():
        raise PreconditionError("dependency name is empty")
    return [f"{dep.name} {aspect.value}" for aspect in Aspect]


def search(
    query: str,
    client: SearchClient,
    *,
    top_k: int = DEFAULT_TOP_K,
    log: RunLog | None = None,
) -> list[SearchResult]:
    """Run one search, returning at most top_k ranked results.

    Client failures (timeouts, unrecorded queries) degrade to an empty result
    list with a logged degradation; they never raise.
    """
    try:
        results = client.search(query)
    except Exception as exc:  # noqa: BLE001 - degradation contract
        logger.warning("search failed for %r: %s", query, exc)
        if log is not None:
            log.add("dynamic_search", f"search failed for {query!r}: {type(exc).__name__}")
        return []
    results = sorted(results, key=lambda r: r.rank)[:top_k]
    ranks = [r.rank for r in results]
    if len(set(ranks)) != len(ranks):
        if log is not None:
            log.add("dynamic_search", f"duplicate ranks for {query!r}; reranked")
        results = [
            result.model_copy(update={"rank": index})
            for index, result in enumerate(results, start=1)
        ]
    return results


def compile_top_issues(
    consideration: Consideration,
    results: list[SearchResult],
    gw: InferenceGateway,
    *,
    log: RunLog | None = None,
) -> list[DynamicIssue]:
    """Distill at most three issues from the search results.

    Every issue must be grounded: each source URL has to appear among the
    results it was compiled from, and issues whose URLs all fail that check
    are dropped. Empty results yield an empty issue list without a model
    call.
    """
    if not results:
        return []
    results_text = "\n".join(
        f"{r.rank}. {r.title} ({r.url})\n   {r.snippet}" for r in results
    )
    try:
        response = gw.infer(
            "compile_issues",
            {
                "dependency": consideration.dependency.name,
                "aspect": consideration.aspect.value,
                "results_text": results_text,
            },
        )
    except Exception as exc:  # noqa: BLE001 - degradation contract
        logger.warning("issue compilation failed: %s", exc)
        if log is not None:
            log.add(
                "dynamic_compile",
                f"compilation failed for {consideration.dependency.name} "
                f"{consideration.aspect.value}: {type(exc).__name__}",
            )
        return []

    known_urls = {r.url for r in results}
    issues = []
    for item in response.payload["issues"][:MAX_ISSUES_PER_CONSIDERATION]:
        grounded = tuple(url for url in item["source_urls"] if url in known_urls)
        if not grounded:
            if log is not None:
                log.add(
                    "dynamic_compile",
                    f"dropped ungrounded issue for {consideration.dependency.name} "
                    f"{consideration.aspect.value}",
                )
            continue
        issues.append(
            DynamicIssue(
                consideration=consideration,
                issue_rank=len(issues) + 1,
                summary=item["summary"],
                source_urls=grounded,
            )
        )
    return issues


def _token_overlap(a: str, b: str) -> float:
    """Jaccard overlap of lowercase token sets."""
    tokens_a = set(a.lower().split())
    tokens_b = set(b.lower().split())
    if not tokens_a or not tokens_b:
        return 0.0
    return len(tokens_a & tokens_b) / len(tokens_a | tokens_b)


def dedup_issues(issues: list[DynamicIssue]) -> list[DynamicIssue]:
    """Merge near-duplicate issues across the aspects of one dependency.

    Two issues with token overlap at or above the threshold merge; the copy
    with the lower issue_rank survives (earlier aspect wins ties). Output is
    sorted by (aspect order, issue_rank).
    """
    by_preference = sorted(
        issues,
        key=lambda issue: (issue.issue_rank, ASPECT_ORDER[issue.consideration.aspect]),
    )
    kept: list[DynamicIssue] = []
    for candidate in by_preference:
        if any(
            _token_overlap(candidate.summary, existing.summary) >= DEDUP_OVERLAP_THRESHOLD
            for existing in kept
        ):
            continue
        kept.append(candidate)
    return sorted(
        kept,
        key=lambda issue: (ASPECT_ORDER[issue.consideration.aspect], issue.issue_rank),
    )


def assess_dynamic(
    issue: DynamicIssue,
    profile: UseCaseProfile,
    gw: InferenceGateway,
    *,
    log: RunLog | None = None,
) -> DynamicFinding:
    """Judge one issue's contextual relevance to the use case.

    Persistent schema violations degrade to a flagged not_applicable finding,
    mirroring the static agents.
    """
    def _degraded(detail: str) -> DynamicFinding:
        return DynamicFinding(
            issue=issue,
            relevance="not_applicable",
            rationale=f"assessment degraded: {detail}",
            degraded=True,
        )

    try:
        response = gw.infer(
            "assess_dynamic_issue",
            {
                "dependency": issue.consideration.dependency.name,
                "aspect": issue.consideration.aspect.value,
                "issue_summary": issue.summary,
                "source_urls": ", ".join(issue.source_urls),
                "profile_text": profile_as_text(profile),
            },
        )
    except SchemaViolationError:
        if log is not None:
            log.add(
                "dynamic_assess",
                f"schema violation assessing {issue.consideration.dependency.name} "
                f"{issue.consideration.aspect.value} #{issue.issue_rank}",
            )
        return _degraded("output failed schema validation")

    payload = response.payload
    if payload["relevance"] == "not_applicable":
        return DynamicFinding(
            issue=issue, relevance="not_applicable", rationale=payload["rationale"]
        )
    return DynamicFinding(
        issue=issue,
        relevance=payload["relevance"],
        severity=payload["severity"],
        likelihood=payload["likelihood"],
        preliminary_score=payload["severity"] * payload["likelihood"],
        rationale=payload["rationale"],
    )


def run_dynamic_stage(
    dependencies: list[NamedDependency],
    profile: UseCaseProfile,
    search_client: SearchClient,
    gw: InferenceGateway,
    *,
    top_k: int = DEFAULT_TOP_K,
    max_parallel: int = 8,
    log: RunLog | None = None,
) -> list[DynamicFinding]:
    """Full dynamic stage: searches, compilation, dedup, and assessment.

    Skips cleanly (empty findings, logged) when there are no dependencies.
    Findings come back sorted by (dependency name, aspect order, issue rank).
    """
    if not dependencies:
        if log is not None:
            log.add("dynamic", "no dependencies named; dynamic stage skipped")
        return []

    considerations = [
        Consideration(dependency=dep, aspect=aspect)
        for dep in dependencies
        for aspect in Aspect
    ]

    def _issues_for(consideration: Consideration) -> list[DynamicIssue]:
        query = f"{consideration.dependency.name} {consideration.aspect.value}"
        results = search(query, search_client, top_k=top_k, log=log)
        return compile_top_issues(consideration, results, gw, log=log)

    if max_parallel == 1:
        per_consideration = [_issues_for(c) for c in considerations]
    else:
        with ThreadPoolExecutor(max_workers=max_parallel) as pool:
            per_consideration = list(pool.map(_issues_for, considerations))

    issues: list[DynamicIssue] = []
    by_dependency: dict[str, list[DynamicIssue]] = {}
    for batch in per_consideration:
        for issue in batch:
            by_dependency.setdefault(issue.consideration.dependency.name, []).append(issue)
    for name in sorted(by_dependency):
        issues.extend(dedup_issues(by_dependency[name]))

    if max_parallel == 1:
        findings = [assess_dynamic(issue, profile, gw, log=log) for issue in issues]
    else:
        with ThreadPoolExecutor(max_workers=max_parallel) as pool:
            findings = list(
                pool.map(lambda issue: assess_dynamic(issue, profile, gw, log=log), issues)
            )
    return sorted(
        findings,
        key=lambda f: (
            f.issue.consideration.dependency.name,
            ASPECT_ORDER[f.issue.consideration.aspect],
            f.issue.issue_rank,
        ),
    )


# --- search clients -------------------------------------------------------------


class ReplaySearchClient:
    """Serves recorded search results keyed by exact query text."""

    def __init__(self, recordings: dict[str, list[SearchResult]]):
        self._recordings = dict(recordings)

    def search(self, query: str) -> list[SearchResult]:
        if query not in self._recordings:
            raise KeyError(f"unrecorded search query: {query!r}")
        return list(self._recordings[query])


class RecordingSearchClient:
    """Wraps another client and appends each query's results to a JSONL file."""

    def __init__(self, inner: SearchClient, path: str | Path):
        self._inner = inner
        self._path = Path(path)
        self._path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def search(self, query: str) -> list[SearchResult]:
        results = self._inner.search(query)
        line = json.dumps(
            {"query": query, "results": [r.model_dump(mode="json") for r in results]},
            ensure_ascii=False,
        )
        with self._lock:
            with self._path.open("a", encoding="utf-8") as handle:
                handle.write(line + "\n")
        return results


class HttpSearchClient:
    """Minimal client for an HTTP search API returning ranked results.

    Expects a JSON body with a `results` array of objects holding `title`,
    `url`, and `snippet`. Endpoint and key come from arguments or the
    GUARD_SEARCH_* environment variables.
    """

    def __init__(
        self,
        endpoint: str | None = None,
        api_key: str | None = None,
        timeout: float = 20.0,
    ):
        self.endpoint = endpoint or os.environ.get(SEARCH_ENDPOINT_ENV, "")
        self.api_key = api_key or os.environ.get(SEARCH_API_KEY_ENV, "")
        self.timeout = timeout
        if not self.endpoint:
            raise ValueError(f"no search endpoint configured (set {SEARCH_ENDPOINT_ENV})")

    def search(self, query: str) -> list[SearchResult]:
        import httpx

        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        response = httpx.get(
            self.endpoint, params={"q": query}, headers=headers, timeout=self.timeout
        )
        response.raise_for_status()
        data = response.json()
        return [
            SearchResult(
                query=query,
                rank=index,
                title=item.get("title", ""),
                url=item["url"],
                snippet=item.get("snippet", ""),
            )
            for index, item in enumerate(data.get("results", []), start=1)
        ]


def load_search_recordings(path: str | Path) -> dict[str, list[SearchResult]]:
    """Read a JSONL search replay file: one {query, results[]} per line."""
    recordings: dict[str, list[SearchResult]] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        doc = json.loads(line)
        recordings[doc["query"]] = [
            SearchResult.model_validate(item) for item in doc["results"]
        ]
    return recordings


def replay_search_client_from_file(path: str | Path) -> ReplaySearchClient:
    return ReplaySearchClient(load_search_recordings(path))
