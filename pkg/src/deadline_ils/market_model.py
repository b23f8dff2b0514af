"""Core market types, file ingestion/emission and price lookup."""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from bisect import bisect_right
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from pathlib import Path

PERIOD_BOUNDARY = datetime(2024, 11, 1, tzinfo=timezone.utc)
EVENT_ANCHOR_LAG = timedelta(seconds=60)


class Outcome(str, enum.Enum):
    YES = "YES"
    NO = "NO"


class Category(str, enum.Enum):
    MILITARY_GEOPOLITICS = "military_geopolitics"
    REGULATORY = "regulatory"
    CORPORATE_DISCLOSURE = "corporate_disclosure"
    OTHER = "other"


class Subcategory(str, enum.Enum):
    REGULATORY_ANNOUNCEMENT = "regulatory_announcement"
    REGULATORY_FORMAL = "regulatory_formal"
    MILGEO_CORPORATE = "milgeo_corporate"


class ResolutionType(str, enum.Enum):
    EVENT_RESOLVED = "event_resolved"
    DEADLINE_RESOLVED = "deadline_resolved"
    UNCLASSIFIABLE = "unclassifiable"


class Period(str, enum.Enum):
    PRE_2024 = "pre_2024"
    POST_2024 = "post_2024"


TARGET_CATEGORIES = frozenset(
    {Category.MILITARY_GEOPOLITICS, Category.REGULATORY, Category.CORPORATE_DISCLOSURE}
)


class IngestError(ValueError):
    """A single record violates a schema invariant."""


class NoCoverageError(LookupError):
    """Price requested before the first observation of a series."""


def parse_timestamp(value: str | datetime) -> datetime:
    """Parse an RFC 3339 timestamp into an aware UTC datetime.

    Naive timestamps are rejected rather than assumed UTC.
    """
    if isinstance(value, datetime):
        dt = value
    else:
        text = value.strip()
        if text.endswith(("Z", "z")):
            text = text[:-1] + "+00:00"
        try:
            dt = datetime.fromisoformat(text)
        except ValueError as exc:
            raise IngestError(f"unparseable timestamp {value!r}") from exc
    if dt.tzinfo is None or dt.utcoffset() is None:
        raise IngestError(f"naive timestamp {value!r}: an explicit UTC offset is required")
    return dt.astimezone(timezone.utc)


def format_timestamp(dt: datetime) -> str:
    dt = dt.astimezone(timezone.utc)
    if dt.microsecond:
        return dt.strftime("%Y-%m-%dT%H:%M:%S.%fZ")
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def period_for(t_resolve: datetime, boundary: datetime = PERIOD_BOUNDARY) -> Period:
    return Period.PRE_2024 if t_resolve < boundary else Period.POST_2024


@dataclass(frozen=True)
class MarketRecord:
    market_id: str
    question: str
    T_open: datetime
    T_resolve: datetime
    volume_usdc: float
    outcome: Outcome
    description: str = ""
    D: datetime | None = None
    category: Category | None = None
    subcategory: Subcategory | None = None
    resolution_type: ResolutionType | None = None
    period: Period | None = None
    cluster: str | None = None

    def __post_init__(self) -> None:
        if not self.market_id:
            raise IngestError("market_id is empty")
        if not self.T_open < self.T_resolve:
            raise IngestError("ordering invariant violated: T_open must precede T_resolve")
        if self.D is not None and self.D < self.T_open:
            raise IngestError("deadline D precedes T_open")
        if self.resolution_type is ResolutionType.DEADLINE_RESOLVED and self.D is None:
            raise IngestError("deadline_resolved market has no deadline D")
        if not (self.volume_usdc >= 0 and math.isfinite(self.volume_usdc)):
            raise IngestError("volume_usdc must be a finite nonnegative number")
        if not isinstance(self.outcome, Outcome):
            raise IngestError(f"outcome must be YES or NO, got {self.outcome!r}")

    @property
    def bucket(self) -> Subcategory | None:
        """Reporting bucket: regulatory subcategory, or the pooled milgeo/corporate cell."""
        if self.category is Category.REGULATORY:
            return self.subcategory
        if self.category in (Category.MILITARY_GEOPOLITICS, Category.CORPORATE_DISCLOSURE):
            return Subcategory.MILGEO_CORPORATE
        return None


@dataclass(frozen=True)
class PriceSeries:
    """Mid-price observations (and optionally trades) for one market."""

    market_id: str
    points: tuple[tuple[datetime, float], ...]
    trades: tuple[tuple[datetime, float, float], ...] = ()
    _times: tuple[datetime, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.points:
            raise IngestError(f"price series {self.market_id} has no points")
        times = tuple(t for t, _ in self.points)
        for earlier, later in zip(times, times[1:]):
            if not earlier < later:
                raise IngestError(f"price series {self.market_id}: timestamps not strictly increasing")
        for _, p in self.points:
            if not 0.0 <= p <= 1.0:
                raise IngestError(f"price series {self.market_id}: mid_price {p} outside [0, 1]")
        for t, p, size in self.trades:
            if not 0.0 <= p <= 1.0 or not size > 0:
                raise IngestError(f"price series {self.market_id}: invalid trade at {t}")
        trade_times = [t for t, _, _ in self.trades]
        if trade_times != sorted(trade_times):
            raise IngestError(f"price series {self.market_id}: trades not ordered")
        object.__setattr__(self, "_times", times)

    @property
    def start(self) -> datetime:
        return self._times[0]

    def price_at(self, t: datetime) -> float:
        return price_at(self, t)


def price_at(series: PriceSeries, t: datetime) -> float:
    """Last observation carried forward: mid-price of the latest point at or before ``t``."""
    idx = bisect_right(series._times, t)
    if idx == 0:
        raise NoCoverageError(
            f"{series.market_id}: no observation at or before {format_timestamp(t)}"
        )
    return series.points[idx - 1][1]


def period_of(record: MarketRecord, boundary: datetime = PERIOD_BOUNDARY) -> Period:
    return period_for(record.T_resolve, boundary)


# --- file I/O -------------------------------------------------------------

MARKET_COLUMNS = (
    "market_id",
    "question",
    "description",
    "T_open",
    "T_resolve",
    "D",
    "volume_usdc",
    "outcome",
    "category",
    "subcategory",
    "resolution_type",
    "period",
    "cluster",
)

_ENUM_FIELDS = {
    "outcome": Outcome,
    "category": Category,
    "subcategory": Subcategory,
    "resolution_type": ResolutionType,
    "period": Period,
}


@dataclass
class Rejection:
    row: int
    market_id: str | None
    reason: str


@dataclass
class IngestResult:
    records: list[MarketRecord]
    rejections: list[Rejection]

    def __iter__(self):
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)


def _blank(value: object) -> bool:
    return value is None or (isinstance(value, str) and value.strip() == "")


def record_from_mapping(row: dict) -> MarketRecord:
    kwargs: dict[str, object] = {}
    for key in ("market_id", "question"):
        if _blank(row.get(key)):
            raise IngestError(f"missing required field {key}")
        kwargs[key] = str(row[key])
    kwargs["description"] = "" if _blank(row.get("description")) else str(row["description"])
    for key in ("T_open", "T_resolve"):
        if _blank(row.get(key)):
            raise IngestError(f"missing required field {key}")
        kwargs[key] = parse_timestamp(row[key])
    kwargs["D"] = None if _blank(row.get("D")) else parse_timestamp(row["D"])
    if _blank(row.get("volume_usdc")):
        raise IngestError("missing required field volume_usdc")
    try:
        kwargs["volume_usdc"] = float(row["volume_usdc"])
    except (TypeError, ValueError) as exc:
        raise IngestError(f"volume_usdc not numeric: {row['volume_usdc']!r}") from exc
    for key, enum_cls in _ENUM_FIELDS.items():
        raw = row.get(key)
        if _blank(raw):
            if key == "outcome":
                raise IngestError("missing required field outcome")
            kwargs[key] = None
            continue
        try:
            kwargs[key] = enum_cls(str(raw).strip())
        except ValueError as exc:
            raise IngestError(f"{key} has invalid value {raw!r}") from exc
    kwargs["cluster"] = None if _blank(row.get("cluster")) else str(row["cluster"])
    return MarketRecord(**kwargs)  # type: ignore[arg-type]


def record_to_mapping(record: MarketRecord) -> dict[str, str]:
    def enc(value: object) -> str:
        if value is None:
            return ""
        if isinstance(value, datetime):
            return format_timestamp(value)
        if isinstance(value, enum.Enum):
            return value.value
        if isinstance(value, float):
            return repr(value) if not value.is_integer() else str(int(value))
        return str(value)

    return {col: enc(getattr(record, col)) for col in MARKET_COLUMNS}


def _detect_format(path: Path, fmt: str | None) -> str:
    if fmt:
        return fmt.upper()
    return "JSONL" if path.suffix.lower() in (".jsonl", ".ndjson") else "CSV"


def _read_rows(path: Path, fmt: str) -> Iterable[tuple[int, dict | None, str | None]]:
    text = path.read_text(encoding="utf-8")
    if fmt == "CSV":
        body = [line for line in text.splitlines(keepends=True) if not line.startswith("#")]
        reader = csv.DictReader(io.StringIO("".join(body)))
        for i, row in enumerate(reader, start=1):
            yield i, row, None
    elif fmt == "JSONL":
        for i, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                yield i, json.loads(line), None
            except json.JSONDecodeError as exc:
                yield i, None, f"malformed JSON: {exc.msg}"
    else:
        raise ValueError(f"unknown format {fmt!r}")


def ingest_markets(path: str | Path, format: str | None = None) -> IngestResult:
    """Read markets from CSV or JSONL; invalid rows go to the rejection report.

    An unreadable file raises ``OSError``.
    """
    path = Path(path)
    fmt = _detect_format(path, format)
    records: list[MarketRecord] = []
    rejections: list[Rejection] = []
    for row_no, row, err in _read_rows(path, fmt):
        if err is not None:
            rejections.append(Rejection(row_no, None, err))
            continue
        assert row is not None
        try:
            records.append(record_from_mapping(row))
        except IngestError as exc:
            rejections.append(Rejection(row_no, row.get("market_id"), str(exc)))
    return IngestResult(records, rejections)


def emit_markets(records: Sequence[MarketRecord], path: str | Path, format: str | None = None) -> None:
    path = Path(path)
    fmt = _detect_format(path, format)
    rows = [record_to_mapping(r) for r in records]
    if fmt == "CSV":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=MARKET_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        path.write_text(buf.getvalue(), encoding="utf-8")
    else:
        lines = [json.dumps(row, ensure_ascii=False) for row in rows]
        path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def series_from_mapping(obj: dict) -> PriceSeries:
    points = tuple((parse_timestamp(t), float(p)) for t, p in obj["points"])
    trades = tuple((parse_timestamp(t), float(p), float(s)) for t, p, s in obj.get("trades") or ())
    return PriceSeries(str(obj["market_id"]), points, trades)


def series_to_mapping(series: PriceSeries) -> dict:
    out: dict[str, object] = {
        "market_id": series.market_id,
        "points": [[format_timestamp(t), p] for t, p in series.points],
    }
    if series.trades:
        out["trades"] = [[format_timestamp(t), p, s] for t, p, s in series.trades]
    return out


def load_price_index(path: str | Path) -> dict[str, PriceSeries]:
    """Load a JSONL file holding one price series per line, keyed by market_id."""
    index: dict[str, PriceSeries] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            series = series_from_mapping(json.loads(line))
            index[series.market_id] = series
    return index


def write_price_index(series: Iterable[PriceSeries], path: str | Path) -> None:
    lines = [json.dumps(series_to_mapping(s)) for s in series]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def with_period(record: MarketRecord, boundary: datetime = PERIOD_BOUNDARY) -> MarketRecord:
    return replace(record, period=period_of(record, boundary))
