"""Event-timestamp recovery: provider cascade, confidence calibration, checkpointing, validation."""

from __future__ import annotations

import json
import os
from collections.abc import Iterable, Iterator, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta
from pathlib import Path
from typing import Protocol

from deadline_ils.market_model import MarketRecord, format_timestamp, parse_timestamp

CONFIDENCE_LEVELS = (0.9, 0.8, 0.7, 0.5, 0.0)
ACCEPT_CONFIDENCE = 0.7
ESCALATE_TIER3_BELOW = 0.5
COMPARABLE_CONFIDENCE = 0.5
MINOR_DISAGREEMENT = timedelta(days=7)
TIERS = ("tier1", "tier2", "tier3")
AGREEMENTS = ("full", "partial", "none")


class ReferenceMismatch(RuntimeError):
    """The reference market's recovered date differs from its known ground truth."""


class ConfigurationError(RuntimeError):
    pass


class ProviderError(RuntimeError):
    pass


@dataclass(frozen=True)
class RecoveryResult:
    market_id: str
    T_event: datetime | None
    confidence: float
    n_sources: int = 0
    sources: tuple[str, ...] = ()
    tier_used: str = "tier1"
    reasoning: str = ""
    cost: float = 0.0

    def __post_init__(self) -> None:
        if self.confidence not in CONFIDENCE_LEVELS:
            raise ValueError(f"confidence {self.confidence} is not an anchored level")
        if (self.T_event is None) != (self.confidence == 0.0):
            raise ValueError("T_event must be absent exactly when confidence is 0.0")
        if self.n_sources < 0:
            raise ValueError("n_sources must be nonnegative")
        if self.tier_used not in TIERS:
            raise ValueError(f"unknown tier {self.tier_used!r}")

    @property
    def accepted(self) -> bool:
        return self.confidence >= ACCEPT_CONFIDENCE

    def within_window(self, record: MarketRecord) -> bool:
        return self.T_event is not None and record.T_open <= self.T_event <= record.T_resolve

    def to_mapping(self) -> dict:
        return {
            "market_id": self.market_id,
            "T_event": format_timestamp(self.T_event) if self.T_event else None,
            "confidence": self.confidence,
            "n_sources": self.n_sources,
            "sources": list(self.sources),
            "tier_used": self.tier_used,
            "reasoning": self.reasoning,
            "cost": self.cost,
        }

    @classmethod
    def from_mapping(cls, obj: Mapping) -> RecoveryResult:
        t = obj.get("T_event")
        return cls(
            market_id=str(obj["market_id"]),
            T_event=parse_timestamp(t) if t else None,
            confidence=float(obj["confidence"]),
            n_sources=int(obj.get("n_sources", 0)),
            sources=tuple(obj.get("sources", ())),
            tier_used=obj.get("tier_used", "tier1"),
            reasoning=obj.get("reasoning", ""),
            cost=float(obj.get("cost", 0.0)),
        )


def unrecovered(market_id: str, tier: str, reasoning: str = "not recoverable") -> RecoveryResult:
    return RecoveryResult(market_id, None, 0.0, 0, (), tier, reasoning)


def calibrate_confidence(n_sources: int, agreement: str) -> float:
    """Map source count and agreement onto the five anchored confidence levels.

    Agreement is judged at calendar-date granularity.
    """
    if n_sources < 0:
        raise ValueError("n_sources must be nonnegative")
    if agreement not in AGREEMENTS:
        raise ValueError(f"agreement must be one of {AGREEMENTS}")
    if agreement == "full":
        if n_sources >= 5:
            return 0.9
        if n_sources >= 3:
            return 0.8
        if n_sources == 2:
            return 0.7
    if n_sources >= 1 and agreement in ("full", "partial"):
        return 0.5
    return 0.0


class Provider(Protocol):
    tier: str

    def recover(
        self, market_id: str, question: str, description: str, T_open: datetime, T_resolve: datetime
    ) -> RecoveryResult: ...


@dataclass
class FileProvider:
    """Deterministic provider backed by a ``market_id -> entry`` mapping.

    Each entry carries ``T_event``, ``n_sources``, ``agreement`` and optional
    ``sources``, ``reasoning`` and ``fail``. A missing entry means the event
    could not be dated; ``fail: true`` simulates a provider outage.
    """

    tier: str
    entries: Mapping[str, Mapping]
    calls: list[str] = field(default_factory=list, repr=False)

    def recover(
        self, market_id: str, question: str, description: str, T_open: datetime, T_resolve: datetime
    ) -> RecoveryResult:
        self.calls.append(market_id)
        entry = self.entries.get(market_id)
        if entry is None:
            return unrecovered(market_id, self.tier)
        if entry.get("fail"):
            raise ProviderError(f"{self.tier} unavailable for {market_id}")
        n = int(entry.get("n_sources", 0))
        confidence = calibrate_confidence(n, entry.get("agreement", "none"))
        t_event = entry.get("T_event")
        if confidence == 0.0 or not t_event:
            return unrecovered(market_id, self.tier, entry.get("reasoning", "not recoverable"))
        sources = tuple(entry.get("sources", ())) or tuple(f"{self.tier}:{market_id}:{i}" for i in range(n))
        return RecoveryResult(
            market_id,
            parse_timestamp(t_event),
            confidence,
            n,
            sources,
            self.tier,
            entry.get("reasoning", ""),
        )


def load_provider_fixture(path: str | Path) -> dict[str, FileProvider]:
    """Read ``{"tier1": {...}, "tier2": {...}, "tier3": {...}}``; absent tiers recover nothing."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return {tier: FileProvider(tier, data.get(tier, {})) for tier in TIERS}


def _attempt(provider: Provider, record: MarketRecord) -> RecoveryResult:
    try:
        result = provider.recover(
            record.market_id, record.question, record.description, record.T_open, record.T_resolve
        )
    except Exception as exc:  # noqa: BLE001 - any provider failure degrades to 0.0
        return unrecovered(record.market_id, provider.tier, f"provider failure: {exc}")
    if result.T_event is not None and result.T_event > record.T_resolve:
        # a date after resolution cannot be the resolving event
        return unrecovered(record.market_id, provider.tier, "recovered date after T_resolve")
    return replace(result, tier_used=provider.tier)


def recover_cascade(
    market: MarketRecord, tier1: Provider, tier2: Provider, tier3: Provider
) -> RecoveryResult:
    """Escalate through the providers in cost order and keep the most confident answer.

    Ties keep the cheaper tier.
    """
    first = _attempt(tier1, market)
    if first.confidence >= ACCEPT_CONFIDENCE:
        return first
    second = _attempt(tier2, market)
    if second.confidence >= ACCEPT_CONFIDENCE:
        return second
    tried = [first, second]
    if max(first.confidence, second.confidence) < ESCALATE_TIER3_BELOW:
        tried.append(_attempt(tier3, market))
    best = tried[0]
    for r in tried[1:]:
        if r.confidence > best.confidence:
            best = r
    return best


@dataclass(frozen=True)
class ReferenceCase:
    record: MarketRecord
    expected_date: str  # ISO calendar date, UTC


def hard_assert_reference(result: RecoveryResult | None, reference: ReferenceCase | None) -> bool:
    """Gate a batch run on reproducing the reference market's known event date."""
    if reference is None:
        raise ConfigurationError("reference fixture is missing")
    if result is None or result.T_event is None:
        raise ReferenceMismatch(f"{reference.record.market_id}: no timestamp recovered")
    got = result.T_event.date().isoformat()
    if got != reference.expected_date:
        raise ReferenceMismatch(
            f"{reference.record.market_id}: recovered {got}, expected {reference.expected_date}"
        )
    return True


# -- checkpointing -----------------------------------------------------------


def read_checkpoint(path: str | Path) -> dict[str, RecoveryResult]:
    """Load completed results; an unparsable line (e.g. a torn final write) is ignored."""
    done: dict[str, RecoveryResult] = {}
    p = Path(path)
    if not p.exists():
        return done
    with p.open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            try:
                r = RecoveryResult.from_mapping(json.loads(line))
            except (ValueError, KeyError, TypeError):
                continue
            done[r.market_id] = r
    return done


class CheckpointWriteError(OSError):
    def __init__(self, message: str, written: int):
        super().__init__(message)
        self.written = written


def _open_log(p: Path):
    # a torn final line must not glue onto the next record
    needs_newline = p.exists() and p.stat().st_size > 0 and not p.read_bytes().endswith(b"\n")
    fh = p.open("a", encoding="utf-8")
    if needs_newline:
        fh.write("\n")
    return fh


def _append(fh, result: RecoveryResult, durable: bool) -> None:
    fh.write(json.dumps(result.to_mapping(), sort_keys=True) + "\n")
    if durable:
        fh.flush()
        os.fsync(fh.fileno())


def checkpoint(results: Iterable[RecoveryResult], path: str | Path, durable: bool = True) -> int:
    """Append results not already logged. Returns the number of lines added.

    ``durable`` fsyncs after every line so an interrupted run loses at most one record.
    """
    p = Path(path)
    done = set(read_checkpoint(p))
    written = 0
    try:
        with _open_log(p) as fh:
            for r in results:
                if r.market_id in done:
                    continue
                _append(fh, r, durable)
                done.add(r.market_id)
                written += 1
    except OSError as exc:
        raise CheckpointWriteError(f"checkpoint write failed after {written} results: {exc}", written) from exc
    return written


def recover_all(
    markets: Sequence[MarketRecord],
    providers: Mapping[str, Provider],
    checkpoint_path: str | Path,
    jobs: int = 5,
    durable: bool = True,
) -> dict[str, RecoveryResult]:
    """Run the cascade over every market not yet checkpointed, at most ``jobs`` at a time.

    Each result is logged as soon as it and every earlier market are done, so
    the log follows input order regardless of scheduling and a restart
    resumes where the last run stopped.
    """
    p = Path(checkpoint_path)
    done = read_checkpoint(p)
    todo = [m for m in markets if m.market_id not in done]
    tiers = [providers[t] for t in TIERS]

    def run(m: MarketRecord) -> RecoveryResult:
        return recover_cascade(m, *tiers)

    written = 0
    try:
        with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool, _open_log(p) as fh:
            for r in pool.map(run, todo):
                _append(fh, r, durable)
                done[r.market_id] = r
                written += 1
    except OSError as exc:
        raise CheckpointWriteError(f"checkpoint write failed after {written} results: {exc}", written) from exc
    return {m.market_id: done[m.market_id] for m in markets}


def load_recoveries(path: str | Path) -> dict[str, RecoveryResult]:
    return read_checkpoint(path)


# -- second-pass validation ----------------------------------------------------


@dataclass(frozen=True)
class ValidationPair:
    market_id: str
    first_pass: RecoveryResult
    second_pass: RecoveryResult
    bucket: str | None = None

    def __post_init__(self) -> None:
        if not (self.first_pass.market_id == self.second_pass.market_id == self.market_id):
            raise ValueError("both passes must reference the pair's market_id")

    @property
    def comparable(self) -> bool:
        return (
            self.second_pass.confidence >= COMPARABLE_CONFIDENCE
            and self.first_pass.T_event is not None
            and self.second_pass.T_event is not None
        )

    @property
    def delta(self) -> timedelta | None:
        if not self.comparable:
            return None
        return abs(self.second_pass.T_event - self.first_pass.T_event)

    @property
    def same_date(self) -> bool:
        return self.comparable and self.first_pass.T_event.date() == self.second_pass.T_event.date()


@dataclass(frozen=True)
class AgreementRates:
    label: str
    sampled_n: int
    comparable_n: int
    exact: int
    within_24h: int
    within_6h: int
    source_overlap: int

    def rate(self, count: int) -> float:
        return count / self.comparable_n if self.comparable_n else float("nan")

    @property
    def exact_rate(self) -> float:
        return self.rate(self.exact)

    @property
    def within_24h_rate(self) -> float:
        return self.rate(self.within_24h)

    @property
    def within_6h_rate(self) -> float:
        return self.rate(self.within_6h)

    @property
    def source_overlap_rate(self) -> float:
        return self.rate(self.source_overlap)


@dataclass(frozen=True)
class Disagreement:
    market_id: str
    bucket: str | None
    first_T_event: datetime | None
    second_T_event: datetime | None
    delta_hours: float | None
    triage: str  # minor | major | no_timestamp


@dataclass(frozen=True)
class AgreementReport:
    overall: AgreementRates
    by_bucket: dict[str, AgreementRates]
    disagreements: list[Disagreement]

    @property
    def comparable_n(self) -> int:
        return self.overall.comparable_n

    @property
    def exact_rate(self) -> float:
        return self.overall.exact_rate

    @property
    def within_24h_rate(self) -> float:
        return self.overall.within_24h_rate

    @property
    def within_6h_rate(self) -> float:
        return self.overall.within_6h_rate

    @property
    def source_overlap_rate(self) -> float:
        return self.overall.source_overlap_rate


def _rates(label: str, pairs: Sequence[ValidationPair]) -> AgreementRates:
    comp = [p for p in pairs if p.comparable]
    return AgreementRates(
        label=label,
        sampled_n=len(pairs),
        comparable_n=len(comp),
        exact=sum(p.same_date for p in comp),
        within_24h=sum(p.delta <= timedelta(hours=24) for p in comp),
        within_6h=sum(p.delta <= timedelta(hours=6) for p in comp),
        source_overlap=sum(bool(set(p.first_pass.sources) & set(p.second_pass.sources)) for p in comp),
    )


def validate_second_pass(pairs: Sequence[ValidationPair]) -> AgreementReport:
    """Agreement rates over comparable pairs plus a triaged disagreement list.

    A comparable pair whose UTC dates differ is a disagreement, triaged minor
    up to a seven-day delta and major beyond. Pairs the second pass could not
    date are listed as ``no_timestamp``.
    """
    if not pairs:
        raise ValueError("validation needs at least one pair")
    buckets: dict[str, list[ValidationPair]] = {}
    for p in pairs:
        if p.bucket is not None:
            buckets.setdefault(p.bucket, []).append(p)
    disagreements = []
    for p in pairs:
        if not p.comparable:
            disagreements.append(
                Disagreement(p.market_id, p.bucket, p.first_pass.T_event, p.second_pass.T_event, None, "no_timestamp")
            )
        elif not p.same_date:
            d = p.delta
            disagreements.append(
                Disagreement(
                    p.market_id,
                    p.bucket,
                    p.first_pass.T_event,
                    p.second_pass.T_event,
                    d.total_seconds() / 3600.0,
                    "minor" if d <= MINOR_DISAGREEMENT else "major",
                )
            )
    return AgreementReport(
        overall=_rates("overall", pairs),
        by_bucket={b: _rates(b, ps) for b, ps in sorted(buckets.items())},
        disagreements=disagreements,
    )


def load_validation_pairs(path: str | Path) -> list[ValidationPair]:
    """JSONL with ``{"market_id", "bucket", "first_pass": {...}, "second_pass": {...}}`` per line."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            mid = obj["market_id"]
            pairs.append(
                ValidationPair(
                    mid,
                    RecoveryResult.from_mapping({"market_id": mid, **obj["first_pass"]}),
                    RecoveryResult.from_mapping({"market_id": mid, **obj["second_pass"]}),
                    obj.get("bucket"),
                )
            )
    return pairs


def iter_accepted(results: Mapping[str, RecoveryResult]) -> Iterator[RecoveryResult]:
    return (r for r in results.values() if r.accepted)
