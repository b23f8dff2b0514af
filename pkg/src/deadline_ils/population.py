"""Population reducers: filter-chain attrition, cell summaries, thresholds, shares."""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np
from scipy import stats

from deadline_ils.market_model import MarketRecord, PriceSeries
from deadline_ils.scoring import Exclusion, ScoreRecord, ScoringConfig, score_market
from deadline_ils.tevent_recovery import RecoveryResult

DEFAULT_SEED = 20260430
BUCKETS = ("regulatory_announcement", "regulatory_formal", "milgeo_corporate")
PERIODS = ("pre_2024", "post_2024")
THRESHOLD_QUANTILES = (0.90, 0.95, 0.99)


# -- filter chain --------------------------------------------------------------

# (label, exclusions that remove a market between this row and the previous one)
ATTRITION_STAGES: tuple[tuple[str, tuple[Exclusion, ...]], ...] = (
    ("Insider-relevant subpopulation, category + volume >= $50K", ()),
    ("After dropping unclassifiable resolution type", (Exclusion.UNCLASSIFIABLE,)),
    ("After dropping deadline-resolved NO outcomes", (Exclusion.DEADLINE_NO,)),
    ("T_event recovered with confidence >= 0.7", (Exclusion.LOW_CONFIDENCE,)),
    ("Positive lead time (T_event > T_open)", (Exclusion.NEGATIVE_TAU,)),
    ("Full CLOB price coverage from T_open", (Exclusion.NO_COVERAGE,)),
    (
        "ILS^dl computed (scope conditions satisfied)",
        (Exclusion.EDGE_EFFECT, Exclusion.TRIVIAL_MOVE, Exclusion.COMPUTE_ERROR),
    ),
)
PRE_CANDIDATE = (Exclusion.CATEGORY_OTHER, Exclusion.LOW_VOLUME)


@dataclass(frozen=True)
class Stage:
    label: str
    n: int
    cumulative_percent: float


@dataclass(frozen=True)
class AttritionTable:
    stages: tuple[Stage, ...]
    n_input: int
    pre_candidate: dict[str, int]

    def __post_init__(self) -> None:
        ns = [s.n for s in self.stages]
        if any(b > a for a, b in zip(ns, ns[1:])):
            raise ValueError("attrition counts must be non-increasing")

    @property
    def counts(self) -> list[int]:
        return [s.n for s in self.stages]


def attrition_from_dispositions(records: Sequence[ScoreRecord]) -> AttritionTable:
    reasons = Counter(r.exclusion_reason for r in records)
    n = len(records) - sum(reasons[e] for e in PRE_CANDIDATE)
    first = n
    stages = []
    for label, removed in ATTRITION_STAGES:
        n -= sum(reasons[e] for e in removed)
        pct = 100.0 * n / first if first else 0.0
        stages.append(Stage(label, n, pct))
    return AttritionTable(tuple(stages), len(records), {e.value: reasons[e] for e in PRE_CANDIDATE})


def run_filter_chain(
    markets: Sequence[MarketRecord],
    recoveries: Mapping[str, RecoveryResult],
    series_index: Mapping[str, PriceSeries],
    config: ScoringConfig = ScoringConfig(),
) -> tuple[AttritionTable, list[ScoreRecord]]:
    """Give every market one terminal disposition and tabulate stage survivors.

    Missing recoveries count as low confidence and missing series as no
    coverage; neither aborts the run.
    """
    seen = set()
    for m in markets:
        if m.market_id in seen:
            raise ValueError(f"duplicate market_id {m.market_id}")
        seen.add(m.market_id)
    records = [
        score_market(m, recoveries.get(m.market_id), series_index.get(m.market_id), config) for m in markets
    ]
    return attrition_from_dispositions(records), records


# -- order statistics ------------------------------------------------------------


def quantile_nearest_rank(values: Sequence[float], q: float) -> float:
    """Smallest value with at least ``q`` of the sample at or below it."""
    x = np.sort(np.asarray(values, dtype=float))
    if x.size == 0:
        raise ValueError("empty sample")
    if not 0.0 < q <= 1.0:
        raise ValueError("q must lie in (0, 1]")
    rank = math.ceil(round(q * x.size, 9))
    return float(x[max(rank, 1) - 1])


def _row_quantile(sorted_rows: np.ndarray, q: float) -> np.ndarray:
    n = sorted_rows.shape[1]
    rank = max(math.ceil(round(q * n, 9)), 1)
    return sorted_rows[:, rank - 1]


def _percentile_ci(samples: np.ndarray) -> tuple[float, float]:
    lo, hi = np.percentile(samples, [2.5, 97.5])
    return float(lo), float(hi)


def _resample(x: np.ndarray, B: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return x[rng.integers(0, x.size, size=(B, x.size))]


@dataclass(frozen=True)
class CellSummary:
    bucket: str | None
    period: str | None
    n: int
    mean: float
    median: float
    std: float | None
    skewness: float | None
    p10: float
    p90: float
    median_ci: tuple[float, float] | None = None
    fraction_positive: float | None = None
    fraction_positive_ci: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if not self.p10 <= self.median <= self.p90:
            raise ValueError("cell quantiles out of order")


def sample_skewness(values: Sequence[float]) -> float | None:
    """Adjusted Fisher-Pearson skewness; absent below three points or at zero variance."""
    x = np.asarray(values, dtype=float)
    if x.size < 3 or np.ptp(x) == 0:
        return None
    return float(stats.skew(x, bias=False))


def summarize_cell(
    scores: Sequence[float],
    bucket: str | None = None,
    period: str | None = None,
    B: int | None = None,
    seed: int = DEFAULT_SEED,
) -> CellSummary:
    """Location, spread and shape of one cell; bootstrap CIs are added when ``B`` is given."""
    x = np.asarray(scores, dtype=float)
    if x.size == 0:
        raise ValueError("a cell needs at least one score")
    fp, fp_ci, med_ci = None, None, None
    if B is not None:
        med_ci = median_bootstrap_ci(x, B, seed)
        fp, fp_ci = fraction_positive(x, B, seed)
    return CellSummary(
        bucket=bucket,
        period=period,
        n=int(x.size),
        mean=float(x.mean()),
        median=float(np.median(x)),
        std=float(x.std(ddof=1)) if x.size > 1 else None,
        skewness=sample_skewness(x),
        p10=quantile_nearest_rank(x, 0.10),
        p90=quantile_nearest_rank(x, 0.90),
        median_ci=med_ci,
        fraction_positive=fp,
        fraction_positive_ci=fp_ci,
    )


@dataclass(frozen=True)
class Threshold:
    quantile: float
    value: float
    ci_low: float
    ci_high: float
    n: int
    low_n: bool


def detection_thresholds(
    scores: Sequence[float],
    quantiles: Sequence[float] = THRESHOLD_QUANTILES,
    B: int = 500,
    seed: int = DEFAULT_SEED,
) -> list[Threshold]:
    """Nearest-rank upper quantiles with market-level percentile-bootstrap CIs.

    One resample matrix serves every quantile. Samples under ten markets are
    flagged ``low_n`` but still reported.
    """
    x = np.asarray(scores, dtype=float)
    if x.size == 0:
        raise ValueError("empty sample")
    boots = np.sort(_resample(x, B, seed), axis=1)
    out = []
    for q in quantiles:
        lo, hi = _percentile_ci(_row_quantile(boots, q))
        out.append(Threshold(q, quantile_nearest_rank(x, q), lo, hi, int(x.size), x.size < 10))
    return out


def median_bootstrap_ci(scores: Sequence[float], B: int = 1000, seed: int = DEFAULT_SEED) -> tuple[float, float] | None:
    x = np.asarray(scores, dtype=float)
    if x.size < 2:
        return None
    return _percentile_ci(np.median(_resample(x, B, seed), axis=1))


def fraction_positive(
    scores: Sequence[float], B: int = 1000, seed: int = DEFAULT_SEED
) -> tuple[float, tuple[float, float] | None]:
    x = np.asarray(scores, dtype=float)
    if x.size == 0:
        raise ValueError("empty sample")
    point = float(np.mean(x > 0))
    if x.size < 2:
        return point, None
    return point, _percentile_ci(np.mean(_resample(x, B, seed) > 0, axis=1))


# -- anchor sensitivity ------------------------------------------------------------


@dataclass(frozen=True)
class AnchorSummary:
    n: int
    robust_count: int
    robust_share: float
    spearman_rho_24h: float | None
    n_pairs: int


def spearman(a: Sequence[float], b: Sequence[float]) -> float | None:
    """Rank correlation with average ranks for ties; absent below three pairs or for a constant side."""
    x, y = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if x.size < 3 or np.ptp(x) == 0 or np.ptp(y) == 0:
        return None
    rx, ry = stats.rankdata(x), stats.rankdata(y)
    return float(np.corrcoef(rx, ry)[0, 1])


def anchor_sensitivity_summary(records: Sequence[ScoreRecord]) -> AnchorSummary:
    scored = [r for r in records if r.in_scope]
    robust = sum(r.anchor_robust for r in scored)
    pairs = [(r.ils_dl, r.anchor_variants.get("24h")) for r in scored if r.anchor_variants.get("24h") is not None]
    rho = spearman([p[0] for p in pairs], [p[1] for p in pairs]) if pairs else None
    share = robust / len(scored) if scored else float("nan")
    return AnchorSummary(len(scored), robust, share, rho, len(pairs))


# -- cells ----------------------------------------------------------------------------


def group_by_cell(
    records: Iterable[ScoreRecord], value: Callable[[ScoreRecord], float | None] = lambda r: r.ils_dl
) -> dict[tuple[str, str], list[float]]:
    cells: dict[tuple[str, str], list[float]] = {}
    for r in records:
        v = value(r)
        if not r.in_scope or v is None or r.bucket is None or r.period is None:
            continue
        cells.setdefault((r.bucket, r.period), []).append(v)
    return cells


def group_by_period(
    records: Iterable[ScoreRecord], value: Callable[[ScoreRecord], float | None] = lambda r: r.ils_dl
) -> dict[str, list[float]]:
    out: dict[str, list[float]] = {}
    for r in records:
        v = value(r)
        if r.in_scope and v is not None and r.period is not None:
            out.setdefault(r.period, []).append(v)
    return out


def tails(records: Sequence[ScoreRecord], k: int = 10) -> tuple[list[ScoreRecord], list[ScoreRecord]]:
    """Top-k and bottom-k in-scope records by raw score (ties broken by market_id)."""
    scored = sorted((r for r in records if r.in_scope), key=lambda r: (r.ils_dl, r.market_id))
    return list(reversed(scored[-k:])), scored[:k]


# -- FFIC disposition -------------------------------------------------------------------

DISPOSITION_LABELS: dict[str, str] = {
    "unclassifiable": "Resolution-typology classifier flagged unclassifiable",
    "deadline_no": "Deadline-resolved with NO outcome (out-of-scope by design)",
    "edge_effect": "Edge-effect (scope condition violated)",
    "low_confidence": "T_event recovery returned confidence below 0.7",
    "compute_error": "Price-data lookup failure (ils_compute_error)",
    "category_other": "Category outside the three target categories",
    "in_scope": "ILS^dl computed in scope",
    "negative_tau": "Non-positive lead time",
    "no_coverage": "Incomplete CLOB price coverage",
    "trivial_move": "Total resolution move below epsilon",
    "low_volume": "Volume below the $50K coverage cutoff",
}


@dataclass(frozen=True)
class DispositionRow:
    disposition: str
    label: str
    count: int
    share: float
    clusters: tuple[str, ...] = ()
    market_ids: tuple[str, ...] = ()


def disposition_of(record: ScoreRecord) -> str:
    return "in_scope" if record.in_scope else record.exclusion_reason.value


def ffic_disposition(
    inventory: Sequence[MarketRecord], dispositions: Mapping[str, ScoreRecord]
) -> list[DispositionRow]:
    """Counts and shares per terminal disposition, most frequent first, with case clusters carried."""
    if not inventory:
        return []
    groups: dict[str, list[MarketRecord]] = {}
    for m in inventory:
        groups.setdefault(disposition_of(dispositions[m.market_id]), []).append(m)
    order = list(DISPOSITION_LABELS)
    rows = [
        DispositionRow(
            d,
            DISPOSITION_LABELS.get(d, d),
            len(ms),
            len(ms) / len(inventory),
            tuple(sorted({m.cluster for m in ms if m.cluster})),
            tuple(m.market_id for m in ms),
        )
        for d, ms in groups.items()
    ]
    rows.sort(key=lambda r: (r.disposition == "in_scope", -r.count, order.index(r.disposition) if r.disposition in order else 99))
    return rows


# -- selection shares ----------------------------------------------------------------------


@dataclass(frozen=True)
class ShareTable:
    shares: dict[str, float]
    counts: dict[str, int]
    total: int
    ratio: float | None = None
    ratio_label: str = ""


def selection_shares(master_counts: Mapping[str, int], numerator: str = "other", denominator: str = "insider_relevant") -> ShareTable:
    """Bucket shares of the cutoff sample plus the ``numerator``/``denominator`` count ratio."""
    total = sum(master_counts.values())
    if total == 0:
        raise ZeroDivisionError("share undefined for an empty master sample")
    shares = {k: v / total for k, v in master_counts.items()}
    ratio = None
    if numerator in master_counts and master_counts.get(denominator):
        ratio = master_counts[numerator] / master_counts[denominator]
    return ShareTable(shares, dict(master_counts), total, ratio, f"{numerator}/{denominator}")
