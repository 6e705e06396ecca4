import random
from datetime import datetime, timezone

import pytest
from hypothesis import given, settings, strategies as st

import guard.register as register_mod
from guard.agents import AgentFinding
from guard.dynamic import Aspect, Consideration, DynamicFinding, DynamicIssue
from guard.errors import MalformedFindingsError, PreconditionError, ScoreRangeError
from guard.gateway import InferenceGateway
from guard.intake import NamedDependency
from guard.register import (
    Band,
    RiskBandConfig,
    RiskRecord,
    band_of,
    filter_negligible,
    load_default_band_config,
    rerank,
    suggest_mitigations,
)
from guard.runlog import RunLog

from helpers import ScriptedBackend

CREATED = datetime(2024, 1, 1, tzinfo=timezone.utc)


def _static(risk_id, severity=None, likelihood=None):
    if severity is None:
        return AgentFinding(
            broad_risk_id=risk_id, relevance="not_applicable", rationale="na"
        )
    return AgentFinding(
        broad_risk_id=risk_id,
        relevance="high",
        severity=severity,
        likelihood=likelihood,
        preliminary_score=severity * likelihood,
        rationale="scored",
    )


def _dynamic(dep, aspect, rank, severity=None, likelihood=None):
    issue = DynamicIssue(
        consideration=Consideration(
            dependency=NamedDependency(name=dep, kind="library"), aspect=aspect
        ),
        issue_rank=rank,
        summary=f"{dep} {aspect.value} finding {rank}",
        source_urls=("https://x.test/1",),
    )
    if severity is None:
        return DynamicFinding(issue=issue, relevance="not_applicable", rationale="na")
    return DynamicFinding(
        issue=issue,
        relevance="medium",
        severity=severity,
        likelihood=likelihood,
        preliminary_score=severity * likelihood,
        rationale="scored",
    )


def _record(record_id, severity, likelihood, source="static_agent"):
    score = severity * likelihood
    return RiskRecord(
        record_id=record_id,
        source=source,
        subject_id=record_id,
        subject_label=record_id,
        severity=severity,
        likelihood=likelihood,
        score=score,
        band=band_of(score),
    )


def test_compile_drops_unscored_findings(registry):
    static = [
        _static(risk.id, 4, 3) for risk in registry.broad_risks[:25]
    ] + [_static(risk.id) for risk in registry.broad_risks[25:]]
    dynamic = [
        _dynamic("Falcon", Aspect.LIMITATIONS, 1, 5, 5),
        _dynamic("Falcon", Aspect.DRAWBACKS, 1, 2, 2),
        _dynamic("FAISS", Aspect.LIMITATIONS, 1, 4, 4),
        _dynamic("FAISS", Aspect.FAILURES, 1, 3, 3),
    ]
    records = register_mod.compile(static, dynamic, risk_names=registry.risk_names())
    assert len(records) == 29
    static_records = [r for r in records if r.source == "static_agent"]
    assert len(static_records) == 25
    assert static_records[0].subject_label == registry.broad_risks[0].name


def test_compile_all_not_applicable_is_empty():
    static = [_static("1.1"), _static("1.2")]
    dynamic = [_dynamic("Falcon", Aspect.LIMITATIONS, 1)]
    assert register_mod.compile(static, dynamic) == []


def test_compile_rejects_duplicate_static_ids():
    with pytest.raises(MalformedFindingsError):
        register_mod.compile([_static("1.1", 2, 2), _static("1.1", 3, 3)], [])


def test_compile_record_ids_deterministic():
    records = register_mod.compile(
        [_static("1.1", 4, 3)], [_dynamic("My Dep", Aspect.FAILURES, 2, 2, 3)]
    )
    assert records[0].record_id == "static:1.1"
    assert records[1].record_id == "dynamic:my-dep:failures:2"


def test_band_boundaries_match_default_table():
    assert band_of(4) is Band.NEGLIGIBLE
    assert band_of(5) is Band.LOW
    assert band_of(12) is Band.MEDIUM
    assert band_of(19) is Band.HIGH
    assert band_of(25) is Band.CRITICAL


def test_band_total_and_monotone_over_range():
    bands = [band_of(score) for score in range(1, 26)]
    order = [Band.NEGLIGIBLE, Band.LOW, Band.MEDIUM, Band.HIGH, Band.CRITICAL]
    indices = [order.index(band) for band in bands]
    assert indices == sorted(indices)
    assert set(bands) == set(order)


def test_band_rejects_out_of_range():
    for bad in (0, 26, -3):
        with pytest.raises(ScoreRangeError):
            band_of(bad)


def test_band_config_requires_ascending_boundaries():
    with pytest.raises(Exception):
        RiskBandConfig(boundaries=(9, 4, 14, 19))
    with pytest.raises(Exception):
        RiskBandConfig(boundaries=(4, 9, 14, 25))


def test_default_band_config_loads():
    cfg = load_default_band_config()
    assert cfg.boundaries == (4, 9, 14, 19)
    assert cfg.eliminate == frozenset({Band.NEGLIGIBLE, Band.LOW})


def test_filter_splits_by_band_preserving_order():
    records = [_record("a", 1, 2), _record("b", 4, 3), _record("c", 5, 5)]
    survivors, eliminated = filter_negligible(records)
    assert [r.score for r in survivors] == [12, 25]
    assert [r.score for r in eliminated] == [2]
    assert len(survivors) + len(eliminated) == len(records)


def test_filter_can_eliminate_everything():
    records = [_record("a", 1, 2), _record("b", 2, 2)]
    survivors, eliminated = filter_negligible(records)
    assert survivors == []
    assert len(eliminated) == 2


def test_filter_with_empty_eliminate_set_is_identity():
    cfg = RiskBandConfig(eliminate=frozenset())
    records = [_record("a", 1, 1), _record("b", 5, 5)]
    survivors, eliminated = filter_negligible(records, cfg)
    assert survivors == records
    assert eliminated == []


def test_rerank_orders_by_score_then_severity():
    records = [
        _record("a", 4, 3),   # 12, severity 4
        _record("b", 5, 5),   # 25
        _record("c", 3, 4),   # 12, severity 3
    ]
    register = rerank(records, created_at=CREATED)
    assert [r.record_id for r in register.records] == ["b", "a", "c"]


def test_rerank_puts_static_before_dynamic_on_ties():
    static = _record("static:1.1", 4, 3)
    dynamic = _record("dynamic:x:failures:1", 4, 3, source="dynamic_agent")
    register = rerank([dynamic, static], created_at=CREATED)
    assert [r.record_id for r in register.records] == [
        "static:1.1",
        "dynamic:x:failures:1",
    ]


@settings(max_examples=50)
@given(st.randoms(use_true_random=False))
def test_rerank_invariant_under_permutation(rng):
    base = [
        _record(f"r{i}", (i % 5) + 1, ((i * 3) % 5) + 1) for i in range(12)
    ]
    shuffled = list(base)
    rng.shuffle(shuffled)
    assert rerank(shuffled, created_at=CREATED) == rerank(base, created_at=CREATED)


def test_rerank_comparator_is_strict_total_order():
    records = [
        _record(f"r{i}", (i % 5) + 1, ((i * 7) % 5) + 1) for i in range(50)
    ]
    keys = [register_mod._rank_key(r) for r in records]
    assert len(set(keys)) == len(keys)  # antisymmetry via distinct keys


def _register_with(n):
    records = [_record(f"static:{i}.{i}", 4, 4) for i in range(1, n + 1)]
    return rerank(records, created_at=CREATED)


def test_mitigations_cover_every_record(fixture_profile):
    register = _register_with(5)
    advices = suggest_mitigations(register, fixture_profile, InferenceGateway(ScriptedBackend()))
    assert len(advices) == 5
    assert sorted(a.record_id for a in advices) == sorted(
        r.record_id for r in register.records
    )
    assert all(a.measures for a in advices)


def test_empty_measures_get_placeholder(fixture_profile):
    register = _register_with(2)
    target = register.records[0].record_id
    log = RunLog()
    backend = ScriptedBackend(mitigation_empty_for={target})
    advices = suggest_mitigations(
        register, fixture_profile, InferenceGateway(backend), log=log
    )
    placeholder = next(a for a in advices if a.record_id == target)
    assert placeholder.measures == ("requires expert review",)
    assert placeholder.degraded
    assert log.degraded


def test_mitigations_require_nonempty_register(fixture_profile):
    empty = rerank([], created_at=CREATED)
    with pytest.raises(PreconditionError):
        suggest_mitigations(empty, fixture_profile, InferenceGateway(ScriptedBackend()))


def test_register_rejects_duplicate_record_ids():
    from guard.register import RiskRegister

    duplicate = _record("same", 4, 4)
    with pytest.raises(Exception):
        RiskRegister(records=(duplicate, duplicate), created_at=CREATED)


def test_elimination_soundness_randomized():
    rng = random.Random(7)
    cfg = RiskBandConfig()
    for _ in range(100):
        records = [
            _record(f"r{i}", rng.randint(1, 5), rng.randint(1, 5))
            for i in range(rng.randint(0, 30))
        ]
        survivors, eliminated = filter_negligible(records, cfg)
        assert len(survivors) + len(eliminated) == len(records)
        register = rerank(survivors, created_at=CREATED)
        assert all(r.band not in cfg.eliminate for r in register.records)
