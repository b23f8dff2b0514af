from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st

from deadline_ils.bundled import fixture_path, load_reference
from deadline_ils.market_model import MarketRecord, Outcome
from deadline_ils.tevent_recovery import (
    AGREEMENTS,
    CONFIDENCE_LEVELS,
    CheckpointWriteError,
    ConfigurationError,
    FileProvider,
    RecoveryResult,
    ReferenceCase,
    ReferenceMismatch,
    ValidationPair,
    calibrate_confidence,
    checkpoint,
    hard_assert_reference,
    load_validation_pairs,
    read_checkpoint,
    recover_all,
    recover_cascade,
    unrecovered,
    validate_second_pass,
)

T0 = datetime(2025, 1, 1, tzinfo=timezone.utc)


def market(mid: str = "m") -> MarketRecord:
    return MarketRecord(mid, "Will X happen by March 1?", T0, T0 + timedelta(days=60), 1e5, Outcome.YES)


@dataclass
class Stub:
    """Provider that answers every market at a fixed confidence."""

    tier: str
    confidence: float
    offset_days: float = 5.0
    calls: list[str] = field(default_factory=list)

    def recover(self, market_id, question, description, T_open, T_resolve):
        self.calls.append(market_id)
        if self.confidence == 0.0:
            return unrecovered(market_id, self.tier)
        return RecoveryResult(market_id, T_open + timedelta(days=self.offset_days), self.confidence, 3, (), self.tier)


class Broken:
    tier = "tier1"

    def recover(self, *args):
        raise TimeoutError("upstream timed out")


@pytest.mark.parametrize(
    "n, agreement, level",
    [(5, "full", 0.9), (3, "full", 0.8), (2, "full", 0.7), (1, "full", 0.5), (4, "partial", 0.5), (0, "none", 0.0), (6, "none", 0.0)],
)
def test_calibrate_confidence(n, agreement, level):
    assert calibrate_confidence(n, agreement) == level


@given(st.integers(0, 50), st.sampled_from(AGREEMENTS))
def test_calibration_is_anchored_and_monotone_in_sources(n, agreement):
    c = calibrate_confidence(n, agreement)
    assert c in CONFIDENCE_LEVELS
    assert calibrate_confidence(n + 1, agreement) >= c


def test_calibrate_rejects_bad_arguments():
    with pytest.raises(ValueError):
        calibrate_confidence(-1, "full")
    with pytest.raises(ValueError):
        calibrate_confidence(1, "most")


def test_result_invariants():
    with pytest.raises(ValueError):
        RecoveryResult("m", T0, 0.65)
    with pytest.raises(ValueError):
        RecoveryResult("m", None, 0.8)
    with pytest.raises(ValueError):
        RecoveryResult("m", T0, 0.8, tier_used="tier9")


def test_cascade_stops_at_confident_tier1():
    t1, t2, t3 = Stub("tier1", 0.8), Stub("tier2", 0.9), Stub("tier3", 0.9)
    r = recover_cascade(market(), t1, t2, t3)
    assert r.tier_used == "tier1" and not t2.calls and not t3.calls


def test_cascade_escalates_to_tier2():
    t1, t2, t3 = Stub("tier1", 0.5), Stub("tier2", 0.7), Stub("tier3", 0.9)
    r = recover_cascade(market(), t1, t2, t3)
    assert (r.tier_used, r.confidence) == ("tier2", 0.7)
    assert not t3.calls


def test_cascade_reaches_tier3_only_below_half():
    t1, t2, t3 = Stub("tier1", 0.0), Stub("tier2", 0.0), Stub("tier3", 0.8)
    assert recover_cascade(market(), t1, t2, t3).tier_used == "tier3"
    t1, t2, t3 = Stub("tier1", 0.5), Stub("tier2", 0.0), Stub("tier3", 0.9)
    r = recover_cascade(market(), t1, t2, t3)
    assert r.tier_used == "tier1" and r.confidence == 0.5 and not t3.calls


def test_provider_failure_degrades_and_continues():
    r = recover_cascade(market(), Broken(), Stub("tier2", 0.8), Stub("tier3", 0.9))
    assert r.tier_used == "tier2"


def test_date_after_resolution_is_discarded():
    late = Stub("tier1", 0.9, offset_days=90)
    r = recover_cascade(market(), late, Stub("tier2", 0.0), Stub("tier3", 0.0))
    assert r.T_event is None and r.confidence == 0.0


def test_file_provider_outage_entry():
    p = FileProvider("tier1", {"m": {"fail": True}})
    r = recover_cascade(market(), p, FileProvider("tier2", {}), FileProvider("tier3", {}))
    assert r.confidence == 0.0


def test_reference_gate():
    ref = load_reference()
    good = RecoveryResult(ref.record.market_id, datetime(2026, 4, 3, 3, 49, tzinfo=timezone.utc), 0.9, 5)
    bad = RecoveryResult(ref.record.market_id, datetime(2026, 4, 4, 9, tzinfo=timezone.utc), 0.9, 5)
    assert hard_assert_reference(good, ref.case)
    with pytest.raises(ReferenceMismatch):
        hard_assert_reference(bad, ref.case)
    with pytest.raises(ReferenceMismatch):
        hard_assert_reference(None, ref.case)
    with pytest.raises(ConfigurationError):
        hard_assert_reference(good, None)


def test_reference_cascade_recovers_expected_date():
    ref = load_reference()
    providers = ref.file_providers()
    r = recover_cascade(ref.record, providers["tier1"], providers["tier2"], providers["tier3"])
    assert hard_assert_reference(r, ReferenceCase(ref.record, "2026-04-03"))


# -- checkpointing ------------------------------------------------------------------------


def _providers(confidence: float = 0.9) -> dict:
    return {t: Stub(t, confidence) for t in ("tier1", "tier2", "tier3")}


def test_checkpoint_replay_is_idempotent(tmp_path):
    path = tmp_path / "r.jsonl"
    markets = [market(f"m{i}") for i in range(3)]
    recover_all(markets, _providers(), path)
    assert len(path.read_text().splitlines()) == 3
    p = _providers()
    recover_all(markets, p, path)
    assert not p["tier1"].calls
    assert len(path.read_text().splitlines()) == 3


def test_resume_after_interruption(tmp_path):
    path = tmp_path / "r.jsonl"
    markets = [market(f"m{i}") for i in range(5)]
    checkpoint([RecoveryResult(m.market_id, T0 + timedelta(days=1), 0.8, 3) for m in markets[:2]], path)
    p = _providers()
    out = recover_all(markets, p, path, jobs=3)
    assert sorted(p["tier1"].calls) == ["m2", "m3", "m4"]
    assert list(out) == [m.market_id for m in markets]
    assert [json.loads(x)["market_id"] for x in path.read_text().splitlines()] == [f"m{i}" for i in range(5)]


def test_torn_final_line_is_rerecovered(tmp_path):
    path = tmp_path / "r.jsonl"
    markets = [market(f"m{i}") for i in range(3)]
    recover_all(markets, _providers(), path)
    text = path.read_text()
    path.write_text(text[: len(text) - 20])
    assert set(read_checkpoint(path)) == {"m0", "m1"}
    p = _providers()
    recover_all(markets, p, path)
    assert p["tier1"].calls == ["m2"]
    assert set(read_checkpoint(path)) == {"m0", "m1", "m2"}
    lines = path.read_text().splitlines()
    assert len(lines) == 4 and lines[2] == text[: len(text) - 20].splitlines()[-1]


def test_checkpoint_write_failure_reports_progress(tmp_path, monkeypatch):
    import deadline_ils.tevent_recovery as tr

    real = tr._append
    calls = []

    def flaky(fh, result, durable):
        if len(calls) == 2:
            raise OSError(28, "No space left on device")
        calls.append(result.market_id)
        real(fh, result, durable)

    monkeypatch.setattr(tr, "_append", flaky)
    path = tmp_path / "r.jsonl"
    with pytest.raises(CheckpointWriteError) as info:
        recover_all([market(f"m{i}") for i in range(4)], _providers(), path, jobs=1)
    assert info.value.written == 2
    assert set(read_checkpoint(path)) == {"m0", "m1"}


def test_unreadable_checkpoint_is_an_io_error(tmp_path):
    target = tmp_path / "dir"
    target.mkdir()
    with pytest.raises(OSError):
        recover_all([market()], _providers(), target)


def test_recovery_mapping_round_trip():
    r = RecoveryResult("m", T0, 0.8, 3, ("a", "b"), "tier2", "why", 0.25)
    assert RecoveryResult.from_mapping(r.to_mapping()) == r


# -- second-pass validation ------------------------------------------------------------------


def test_validation_fixture_rates():
    report = validate_second_pass(load_validation_pairs(fixture_path("validation_pairs.jsonl")))
    assert report.comparable_n == 45
    assert round(report.exact_rate, 3) == 0.578
    assert round(report.within_24h_rate, 3) == 0.689
    assert report.source_overlap_rate == 0.0
    assert report.by_bucket["milgeo_corporate"].comparable_n == 19
    triage = [d.triage for d in report.disagreements]
    assert triage.count("no_timestamp") == 5


def test_disjoint_sources_same_date_agree():
    a = RecoveryResult("m", T0, 0.8, 3, ("x",))
    b = RecoveryResult("m", T0 + timedelta(hours=3), 0.7, 2, ("y",))
    report = validate_second_pass([ValidationPair("m", a, b)])
    assert report.overall.exact == 1 and report.source_overlap_rate == 0.0
    assert not report.disagreements


def test_disagreement_triage():
    a = RecoveryResult("m", T0, 0.8, 3)
    pairs = [
        ValidationPair("m", a, RecoveryResult("m", T0 + timedelta(days=3), 0.8, 3)),
        ValidationPair("m", a, RecoveryResult("m", T0 + timedelta(days=30), 0.8, 3)),
    ]
    assert [d.triage for d in validate_second_pass(pairs).disagreements] == ["minor", "major"]


def test_validation_requires_pairs():
    with pytest.raises(ValueError):
        validate_second_pass([])
