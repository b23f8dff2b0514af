"""Raw deadline-resolved leakage score, scope gates, anchor variants and trade-level bootstrap."""

from __future__ import annotations

import enum
import hashlib
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from deadline_ils.market_model import (
    EVENT_ANCHOR_LAG,
    TARGET_CATEGORIES,
    Category,
    MarketRecord,
    NoCoverageError,
    Outcome,
    PriceSeries,
    ResolutionType,
    format_timestamp,
    parse_timestamp,
    price_at,
)
from deadline_ils.tevent_recovery import RecoveryResult

EPSILON = 0.05
EDGE = 0.4
CONFIDENCE_MIN = 0.7
MIN_VOLUME_USDC = 50_000.0
ROBUST_SHIFT = 0.3
DEFAULT_SEED = 20260430
COVERAGE_TOLERANCE = timedelta(hours=1)

ANCHOR_OFFSETS: dict[str, timedelta] = {
    "30min": timedelta(minutes=30),
    "2h": timedelta(hours=2),
    "6h": timedelta(hours=6),
    "24h": timedelta(hours=24),
}


class Exclusion(str, enum.Enum):
    CATEGORY_OTHER = "category_other"
    LOW_VOLUME = "low_volume"
    UNCLASSIFIABLE = "unclassifiable"
    DEADLINE_NO = "deadline_no"
    LOW_CONFIDENCE = "low_confidence"
    NEGATIVE_TAU = "negative_tau"
    NO_COVERAGE = "no_coverage"
    EDGE_EFFECT = "edge_effect"
    TRIVIAL_MOVE = "trivial_move"
    COMPUTE_ERROR = "compute_error"


# Evaluation order; the first failing gate names the disposition.
EXCLUSION_ORDER: tuple[Exclusion, ...] = tuple(Exclusion)


class TrivialMove(ValueError):
    """Total resolution move smaller than epsilon."""


def stable_stream(seed: int, market_id: str) -> np.random.Generator:
    """RNG stream keyed on (seed, market_id), independent of processing order."""
    digest = int.from_bytes(hashlib.sha256(market_id.encode("utf-8")).digest()[:8], "little")
    return np.random.default_rng(np.random.SeedSequence([seed, digest]))


def compute_ils_dl(p_open: float, p_event_minus: float, p_resolve: float, epsilon: float = EPSILON) -> float:
    """Share of the open-to-resolution move completed by ``p_event_minus``."""
    total = p_resolve - p_open
    if abs(total) < epsilon:
        raise TrivialMove(f"|p_resolve - p_open| = {abs(total):.4g} < {epsilon}")
    return (p_event_minus - p_open) / total


@dataclass(frozen=True)
class ScopeConfig:
    epsilon: float = EPSILON
    edge: float = EDGE
    confidence_min: float = CONFIDENCE_MIN
    min_volume: float = MIN_VOLUME_USDC
    coverage_tolerance: timedelta = COVERAGE_TOLERANCE


@dataclass(frozen=True)
class ScopeResult:
    exclusion: Exclusion | None
    p_open: float | None = None
    p_event: float | None = None
    p_resolve: float | None = None
    detail: str = ""

    @property
    def in_scope(self) -> bool:
        return self.exclusion is None


def resolve_price(record: MarketRecord) -> float:
    return 1.0 if record.outcome is Outcome.YES else 0.0


def check_scope(
    record: MarketRecord,
    recovery: RecoveryResult | None,
    series: PriceSeries | None,
    config: ScopeConfig = ScopeConfig(),
) -> ScopeResult:
    """Walk the gates in fixed order and report the first failure, or in-scope prices.

    The opening price is the first mid-price observation. Coverage requires
    that observation within ``coverage_tolerance`` of ``T_open``.
    """
    if record.category is None or record.resolution_type is None:
        raise ValueError(f"{record.market_id}: record must be classified before scoping")
    if record.category not in TARGET_CATEGORIES:
        return ScopeResult(Exclusion.CATEGORY_OTHER)
    if record.volume_usdc < config.min_volume:
        return ScopeResult(Exclusion.LOW_VOLUME)
    if record.resolution_type is ResolutionType.UNCLASSIFIABLE:
        return ScopeResult(Exclusion.UNCLASSIFIABLE)
    if record.resolution_type is ResolutionType.DEADLINE_RESOLVED and record.outcome is Outcome.NO:
        return ScopeResult(Exclusion.DEADLINE_NO)
    if recovery is None or recovery.T_event is None or recovery.confidence < config.confidence_min:
        return ScopeResult(Exclusion.LOW_CONFIDENCE)
    if recovery.T_event <= record.T_open:
        return ScopeResult(Exclusion.NEGATIVE_TAU)
    if series is None or not series.points or series.start > record.T_open + config.coverage_tolerance:
        return ScopeResult(Exclusion.NO_COVERAGE)
    p_open = series.points[0][1]
    p_resolve = resolve_price(record)
    if abs(p_open - 0.5) >= config.edge:
        return ScopeResult(Exclusion.EDGE_EFFECT, p_open, None, p_resolve)
    if abs(p_resolve - p_open) < config.epsilon:
        return ScopeResult(Exclusion.TRIVIAL_MOVE, p_open, None, p_resolve)
    try:
        p_event = price_at(series, recovery.T_event - EVENT_ANCHOR_LAG)
    except NoCoverageError as exc:
        return ScopeResult(Exclusion.COMPUTE_ERROR, p_open, None, p_resolve, str(exc))
    return ScopeResult(None, p_open, p_event, p_resolve)


def anchor_value(
    series: PriceSeries,
    T_open: datetime,
    T_event: datetime,
    offset: timedelta,
    p_open: float,
    p_resolve: float,
    epsilon: float = EPSILON,
) -> float | None:
    """Score with the price ``offset`` before ``T_event``; offsets reaching past the open clip to it."""
    t = T_event - offset
    if t <= T_open:
        return compute_ils_dl(p_open, p_open, p_resolve, epsilon)
    try:
        p = price_at(series, t)
    except NoCoverageError:
        return None
    return compute_ils_dl(p_open, p, p_resolve, epsilon)


def anchor_matrix(
    series: PriceSeries,
    T_event: datetime,
    p_open: float,
    p_resolve: float,
    T_open: datetime | None = None,
    epsilon: float = EPSILON,
) -> dict[str, float | None]:
    """Short-window variants keyed ``30min``/``2h``/``6h``/``24h``; ``None`` marks a coverage gap."""
    start = T_open if T_open is not None else series.start
    return {
        name: anchor_value(series, start, T_event, off, p_open, p_resolve, epsilon)
        for name, off in ANCHOR_OFFSETS.items()
    }


def anchor_robust(base: float, variants: Mapping[str, float | None], max_shift: float = ROBUST_SHIFT) -> bool:
    """No strict sign reversal and no shift beyond ``max_shift``; no available variant means not robust."""
    available = [v for v in variants.values() if v is not None]
    if not available:
        return False
    for v in available:
        if base * v < 0:
            return False
        if abs(v - base) > max_shift:
            return False
    return True


def bootstrap_ci_trades(
    series: PriceSeries,
    T_open: datetime,
    T_event: datetime,
    p_open: float,
    p_resolve: float,
    B: int = 500,
    seed: int = DEFAULT_SEED,
    market_id: str | None = None,
    epsilon: float = EPSILON,
) -> tuple[float, float] | None:
    """Percentile 95% interval from resampling the pre-anchor trades with replacement.

    Each replicate reads the event price off the latest resampled trade
    before ``T_event - 60 s``. The opening price is held fixed.
    """
    if B < 1:
        raise ValueError("B must be >= 1")
    anchor = T_event - EVENT_ANCHOR_LAG
    prices = np.array([p for t, p, _ in series.trades if T_open <= t <= anchor], dtype=float)
    if prices.size < 2:
        return None
    total = p_resolve - p_open
    if abs(total) < epsilon:
        raise TrivialMove("trivial total move")
    rng = stable_stream(seed, market_id if market_id is not None else series.market_id)
    idx = rng.integers(0, prices.size, size=(B, prices.size))
    # trades are time-ordered, so the latest resampled trade has the largest index
    stats = (prices[idx.max(axis=1)] - p_open) / total
    low, high = np.percentile(stats, [2.5, 97.5])
    return float(low), float(high)


SCORE_COLUMNS = (
    "market_id",
    "question",
    "T_open",
    "T_resolve",
    "volume_usdc",
    "category",
    "subcategory",
    "resolution_type",
    "period",
    "T_event",
    "T_event_confidence",
    "tau_days",
    "p_open",
    "p_event",
    "p_resolve",
    "ils_dl",
    "ils_dl_ci_low",
    "ils_dl_ci_high",
    "ils_dl_adj",
    "ils_dl_adj_ci_low",
    "ils_dl_adj_ci_high",
    "expected_decay_price",
    "ils_dl_30min",
    "ils_dl_2h",
    "ils_dl_6h",
    "ils_dl_24h",
    "in_scope",
    "exclusion_reason",
    "anchor_robust",
    # not in the published schema; needed to rebuild the decay baseline
    "D",
)


@dataclass(frozen=True)
class ScoreRecord:
    market_id: str
    question: str
    T_open: datetime
    T_resolve: datetime
    volume_usdc: float
    category: str
    subcategory: str | None
    resolution_type: str
    period: str | None
    D: datetime | None = None
    T_event: datetime | None = None
    T_event_confidence: float | None = None
    p_open: float | None = None
    p_event: float | None = None
    p_resolve: float | None = None
    ils_dl: float | None = None
    ci_low: float | None = None
    ci_high: float | None = None
    anchor_variants: dict[str, float | None] = field(default_factory=dict)
    anchor_robust: bool = False
    exclusion_reason: Exclusion | None = None
    ils_dl_adj: float | None = None
    adj_ci_low: float | None = None
    adj_ci_high: float | None = None
    expected_decay_price: float | None = None

    def __post_init__(self) -> None:
        if self.in_scope:
            if None in (self.p_open, self.p_event, self.p_resolve, self.ils_dl):
                raise ValueError(f"{self.market_id}: in-scope record lacks prices or score")
            if not math.isclose(self.ils_dl, self.delta_pre / self.delta_total, rel_tol=1e-12, abs_tol=1e-12):
                raise ValueError(f"{self.market_id}: ils_dl disagrees with delta_pre/delta_total")
        elif self.ils_dl is not None:
            raise ValueError(f"{self.market_id}: excluded record carries a score")

    @property
    def in_scope(self) -> bool:
        return self.exclusion_reason is None

    @property
    def delta_pre(self) -> float | None:
        if self.p_event is None or self.p_open is None:
            return None
        return self.p_event - self.p_open

    @property
    def delta_total(self) -> float | None:
        if self.p_resolve is None or self.p_open is None:
            return None
        return self.p_resolve - self.p_open

    @property
    def tau_days(self) -> float | None:
        if self.T_event is None:
            return None
        return (self.T_event - self.T_open).total_seconds() / 86400.0

    @property
    def bucket(self) -> str | None:
        if self.category == Category.REGULATORY.value:
            return self.subcategory
        if self.category in (Category.MILITARY_GEOPOLITICS.value, Category.CORPORATE_DISCLOSURE.value):
            return "milgeo_corporate"
        return None

    @property
    def ci_contains_point(self) -> bool | None:
        if self.ci_low is None or self.ils_dl is None:
            return None
        return self.ci_low <= self.ils_dl <= self.ci_high

    def to_row(self) -> dict[str, str]:
        def num(x: float | None) -> str:
            return "" if x is None else repr(float(x))

        def ts(x: datetime | None) -> str:
            return "" if x is None else format_timestamp(x)

        row = {
            "market_id": self.market_id,
            "question": self.question,
            "T_open": ts(self.T_open),
            "T_resolve": ts(self.T_resolve),
            "volume_usdc": num(self.volume_usdc),
            "category": self.category,
            "subcategory": self.subcategory or "",
            "resolution_type": self.resolution_type,
            "period": self.period or "",
            "T_event": ts(self.T_event),
            "T_event_confidence": num(self.T_event_confidence),
            "tau_days": num(self.tau_days),
            "p_open": num(self.p_open),
            "p_event": num(self.p_event),
            "p_resolve": num(self.p_resolve),
            "ils_dl": num(self.ils_dl),
            "ils_dl_ci_low": num(self.ci_low),
            "ils_dl_ci_high": num(self.ci_high),
            "ils_dl_adj": num(self.ils_dl_adj),
            "ils_dl_adj_ci_low": num(self.adj_ci_low),
            "ils_dl_adj_ci_high": num(self.adj_ci_high),
            "expected_decay_price": num(self.expected_decay_price),
            "in_scope": str(self.in_scope).lower(),
            "exclusion_reason": self.exclusion_reason.value if self.exclusion_reason else "",
            "anchor_robust": str(self.anchor_robust).lower(),
            "D": ts(self.D),
        }
        for name in ANCHOR_OFFSETS:
            row[f"ils_dl_{name}"] = num(self.anchor_variants.get(name))
        return {c: row[c] for c in SCORE_COLUMNS}

    @classmethod
    def from_row(cls, row: Mapping[str, str]) -> ScoreRecord:
        def num(key: str) -> float | None:
            v = row.get(key, "")
            return None if v in ("", None) else float(v)

        def ts(key: str) -> datetime | None:
            v = row.get(key, "")
            return None if v in ("", None) else parse_timestamp(v)

        reason = row.get("exclusion_reason") or None
        return cls(
            market_id=row["market_id"],
            question=row["question"],
            T_open=parse_timestamp(row["T_open"]),
            T_resolve=parse_timestamp(row["T_resolve"]),
            volume_usdc=float(row["volume_usdc"]),
            category=row["category"],
            subcategory=row.get("subcategory") or None,
            resolution_type=row["resolution_type"],
            period=row.get("period") or None,
            D=ts("D"),
            T_event=ts("T_event"),
            T_event_confidence=num("T_event_confidence"),
            p_open=num("p_open"),
            p_event=num("p_event"),
            p_resolve=num("p_resolve"),
            ils_dl=num("ils_dl"),
            ci_low=num("ils_dl_ci_low"),
            ci_high=num("ils_dl_ci_high"),
            anchor_variants={name: num(f"ils_dl_{name}") for name in ANCHOR_OFFSETS},
            anchor_robust=row.get("anchor_robust") == "true",
            exclusion_reason=Exclusion(reason) if reason else None,
            ils_dl_adj=num("ils_dl_adj"),
            adj_ci_low=num("ils_dl_adj_ci_low"),
            adj_ci_high=num("ils_dl_adj_ci_high"),
            expected_decay_price=num("expected_decay_price"),
        )


@dataclass(frozen=True)
class ScoringConfig:
    scope: ScopeConfig = ScopeConfig()
    b_trade: int = 500
    seed: int = DEFAULT_SEED


def score_market(
    record: MarketRecord,
    recovery: RecoveryResult | None,
    series: PriceSeries | None,
    config: ScoringConfig = ScoringConfig(),
) -> ScoreRecord:
    """Scope-check one market and, when in scope, score it with anchors and a trade-level CI."""
    scope = check_scope(record, recovery, series, config.scope)
    base = dict(
        market_id=record.market_id,
        question=record.question,
        T_open=record.T_open,
        T_resolve=record.T_resolve,
        volume_usdc=record.volume_usdc,
        category=record.category.value,
        subcategory=record.subcategory.value if record.subcategory else None,
        resolution_type=record.resolution_type.value,
        period=record.period.value if record.period else None,
        D=record.D,
        T_event=recovery.T_event if recovery is not None else None,
        T_event_confidence=recovery.confidence if recovery is not None else None,
        p_open=scope.p_open,
        p_resolve=scope.p_resolve,
    )
    if not scope.in_scope:
        return ScoreRecord(**base, exclusion_reason=scope.exclusion)
    eps = config.scope.epsilon
    ils = compute_ils_dl(scope.p_open, scope.p_event, scope.p_resolve, eps)
    variants = anchor_matrix(series, recovery.T_event, scope.p_open, scope.p_resolve, record.T_open, eps)
    ci = bootstrap_ci_trades(
        series,
        record.T_open,
        recovery.T_event,
        scope.p_open,
        scope.p_resolve,
        config.b_trade,
        config.seed,
        record.market_id,
        eps,
    )
    return ScoreRecord(
        **base,
        p_event=scope.p_event,
        ils_dl=ils,
        ci_low=ci[0] if ci else None,
        ci_high=ci[1] if ci else None,
        anchor_variants=variants,
        anchor_robust=anchor_robust(ils, variants),
    )
