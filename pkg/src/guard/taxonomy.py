"""Risk taxonomy registry: loading, validation, and lens queries.

The catalog groups thirty broad risks under four categories and tags each risk
along three classification axes (process, component, use case). The default
catalog ships as package data; assessments record the catalog version they ran
against.
"""

from __future__ import annotations

import json
from enum import Enum
from importlib import resources
from typing import Iterable

from pydantic import BaseModel, ConfigDict, ValidationError

from .errors import TaxonomyParseError, TaxonomyValidationError, UnknownLensValueError
from ._util import canonical_json_bytes, dotted_sort_key

EXPECTED_CATEGORY_NAMES = (
    "Content Risks",
    "Context Risks",
    "Trust Risks",
    "Societal Impact and Sustainability Risks",
)

EXPECTED_BROAD_RISK_COUNT = 30
EXPECTED_CATEGORY_SIZES = {"1": 6, "2": 7, "3": 9, "4": 8}

LENS_VOCABULARY: dict[str, frozenset[str]] = {
    "process": frozenset(
        {
            "data aggregation",
            "embedding",
            "prompt engineering",
            "retrieval augmented generation",
            "fine-tuning",
            "evaluation",
            "validation",
            "moderation",
            "monitoring",
        }
    ),
    "component": frozenset(
        {
            "data",
            "model",
            "pipeline",
            "infrastructure",
            "interface",
            "integrations",
            "deployment",
            "human-in-the-loop",
        }
    ),
    "use_case": frozenset({"scope", "nature", "context", "purpose"}),
}


class LensAxis(str, Enum):
    PROCESS = "process"
    COMPONENT = "component"
    USE_CASE = "use_case"


class DimensionTag(BaseModel):
    """One (axis, value) classification assignment on a broad risk."""

    model_config = ConfigDict(frozen=True)

    axis: LensAxis
    value: str


class RiskCategory(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    name: str
    ordinal: int


class BroadRisk(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    category_id: str
    name: str
    description: str
    dimensions: tuple[DimensionTag, ...] = ()


class SubRisk(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    parent_id: str
    name: str


class TaxonomyRegistry(BaseModel):
    model_config = ConfigDict(frozen=True)

    version: str
    categories: tuple[RiskCategory, ...]
    broad_risks: tuple[BroadRisk, ...]
    sub_risks: tuple[SubRisk, ...] = ()
    declared_subrisk_count: int = 0

    def risk(self, risk_id: str) -> BroadRisk:
        for risk in self.broad_risks:
            if risk.id == risk_id:
                return risk
        raise KeyError(risk_id)

    def risk_names(self) -> dict[str, str]:
        return {risk.id: risk.name for risk in self.broad_risks}


class Violation(BaseModel):
    """One failed registry constraint, identified by constraint and entity."""

    model_config = ConfigDict(frozen=True)

    constraint: str
    entity_id: str
    detail: str


class ValidationReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    passed: bool
    violations: tuple[Violation, ...]


def load_taxonomy(source: bytes) -> TaxonomyRegistry:
    """Parse and validate a taxonomy document.

    Args:
        source: UTF-8 JSON bytes in the taxonomy file format.

    Returns:
        A registry that passes ``validate_registry``. Loading is pure: the
        same bytes always produce the same registry.

    Raises:
        TaxonomyParseError: the document is not well-formed.
        TaxonomyValidationError: a registry constraint is violated; the error
            carries the constraint name and offending entity id.
    """
    try:
        doc = json.loads(source.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TaxonomyParseError(f"malformed taxonomy document: {exc}") from exc
    try:
        registry = TaxonomyRegistry.model_validate(doc)
    except ValidationError as exc:
        raise TaxonomyParseError(f"taxonomy document shape invalid: {exc}") from exc
    report = validate_registry(registry)
    if not report.passed:
        raise TaxonomyValidationError(report.violations)
    return registry


def serialize_taxonomy(registry: TaxonomyRegistry) -> bytes:
    """Canonical byte form; ``load_taxonomy`` of the result round-trips."""
    return canonical_json_bytes(registry.model_dump(mode="json"))


def load_default_taxonomy() -> TaxonomyRegistry:
    """Load the catalog bundled with the package."""
    data = resources.files("guard.data").joinpath("taxonomy.json").read_bytes()
    return load_taxonomy(data)


def validate_registry(registry: TaxonomyRegistry) -> ValidationReport:
    """Check every registry constraint; violations are data, not errors."""
    violations: list[Violation] = []

    categories = registry.categories
    if len(categories) != 4:
        violations.append(
            Violation(
                constraint="category-count",
                entity_id="categories",
                detail=f"expected 4 categories, found {len(categories)}",
            )
        )
    names = {c.name for c in categories}
    for expected in EXPECTED_CATEGORY_NAMES:
        if expected not in names:
            violations.append(
                Violation(
                    constraint="category-names",
                    entity_id=expected,
                    detail=f"missing category named {expected!r}",
                )
            )
    ordinals = sorted(c.ordinal for c in categories)
    if len(categories) == 4 and ordinals != [1, 2, 3, 4]:
        violations.append(
            Violation(
                constraint="category-ordinals",
                entity_id="categories",
                detail=f"ordinals {ordinals} are not a permutation of 1..4",
            )
        )

    category_ids = {c.id for c in categories}
    seen_ids: set[str] = set()
    for risk in registry.broad_risks:
        if risk.id in seen_ids:
            violations.append(
                Violation(
                    constraint="duplicate-id",
                    entity_id=risk.id,
                    detail=f"broad risk id {risk.id!r} occurs more than once",
                )
            )
        seen_ids.add(risk.id)
        if risk.category_id not in category_ids:
            violations.append(
                Violation(
                    constraint="unknown-category",
                    entity_id=risk.id,
                    detail=f"category_id {risk.category_id!r} does not exist",
                )
            )
        if not risk.id.startswith(risk.category_id + "."):
            violations.append(
                Violation(
                    constraint="id-prefix",
                    entity_id=risk.id,
                    detail=f"id {risk.id!r} does not start with {risk.category_id!r}",
                )
            )
        for tag in risk.dimensions:
            if tag.value not in LENS_VOCABULARY[tag.axis.value]:
                violations.append(
                    Violation(
                        constraint="unknown-dimension-value",
                        entity_id=risk.id,
                        detail=f"{tag.axis.value} value {tag.value!r} not in vocabulary",
                    )
                )

    if len(registry.broad_risks) != EXPECTED_BROAD_RISK_COUNT:
        violations.append(
            Violation(
                constraint="broad-risk-count",
                entity_id="broad_risks",
                detail=(
                    f"expected {EXPECTED_BROAD_RISK_COUNT} broad risks, "
                    f"found {len(registry.broad_risks)}"
                ),
            )
        )
    else:
        sizes: dict[str, int] = {}
        for risk in registry.broad_risks:
            sizes[risk.category_id] = sizes.get(risk.category_id, 0) + 1
        for cat_id, expected_size in EXPECTED_CATEGORY_SIZES.items():
            if sizes.get(cat_id, 0) != expected_size:
                violations.append(
                    Violation(
                        constraint="category-partition",
                        entity_id=cat_id,
                        detail=(
                            f"category {cat_id} holds {sizes.get(cat_id, 0)} risks, "
                            f"expected {expected_size}"
                        ),
                    )
                )

    seen_sub_ids: set[str] = set()
    for sub in registry.sub_risks:
        if sub.id in seen_sub_ids:
            violations.append(
                Violation(
                    constraint="duplicate-subrisk-id",
                    entity_id=sub.id,
                    detail=f"sub-risk id {sub.id!r} occurs more than once",
                )
            )
        seen_sub_ids.add(sub.id)
        if sub.parent_id not in seen_ids:
            violations.append(
                Violation(
                    constraint="subrisk-parent",
                    entity_id=sub.id,
                    detail=f"parent_id {sub.parent_id!r} does not resolve to a broad risk",
                )
            )

    if registry.declared_subrisk_count != len(registry.sub_risks):
        violations.append(
            Violation(
                constraint="declared-subrisk-count",
                entity_id="sub_risks",
                detail=(
                    f"declared {registry.declared_subrisk_count} sub-risks, "
                    f"found {len(registry.sub_risks)}"
                ),
            )
        )

    return ValidationReport(passed=not violations, violations=tuple(violations))


def risks_by_lens(
    registry: TaxonomyRegistry, axis: LensAxis | str, value: str
) -> list[BroadRisk]:
    """Broad risks tagged (axis, value), sorted by id.

    Raises:
        UnknownLensValueError: value is outside the axis vocabulary.
    """
    axis = LensAxis(axis)
    if value not in LENS_VOCABULARY[axis.value]:
        raise UnknownLensValueError(
            f"unknown {axis.value} value {value!r}; "
            f"expected one of {sorted(LENS_VOCABULARY[axis.value])}"
        )
    matched = [
        risk
        for risk in registry.broad_risks
        if any(tag.axis == axis and tag.value == value for tag in risk.dimensions)
    ]
    return sorted(matched, key=lambda risk: dotted_sort_key(risk.id))


def lens_values(axis: LensAxis | str) -> list[str]:
    return sorted(LENS_VOCABULARY[LensAxis(axis).value])


def sorted_risks(risks: Iterable[BroadRisk]) -> list[BroadRisk]:
    return sorted(risks, key=lambda risk: dotted_sort_key(risk.id))
