"""Synthetic deadline markets with known arrival hazard, leakage and outcome.

Each market opens at its implied (or a fixed) price and, absent leakage,
trades exactly on the rational-decay baseline plus optional jitter until the
event arrives. That makes the decay-adjusted score zero-mean by construction.
"""

from __future__ import annotations

import csv
import json
from collections.abc import Mapping
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from deadline_ils.decay import baseline_array, survival_array
from deadline_ils.hazard import FAMILIES, HazardFit
from deadline_ils.market_model import (
    Category,
    MarketRecord,
    Outcome,
    PriceSeries,
    ResolutionType,
    emit_markets,
    format_timestamp,
    with_period,
    write_price_index,
)
from deadline_ils.tevent_recovery import RecoveryResult, checkpoint, unrecovered

DEFAULT_START = datetime(2025, 1, 6, tzinfo=timezone.utc)
CLIP = (0.001, 0.999)
_DAY = 86400.0


def model_fit(family: str, params: Mapping[str, float]) -> HazardFit:
    """A parameter-only fit usable as a baseline model."""
    return HazardFit(family, dict(params), 1, 0.0)


@dataclass(frozen=True)
class Leak:
    lead_days: float
    drift: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.drift <= 1.0:
            raise ValueError("drift must lie in [0, 1]")
        if self.lead_days <= 0:
            raise ValueError("lead_days must be positive")


@dataclass(frozen=True)
class SynthConfig:
    family: str = "exponential"
    params: dict[str, float] = field(default_factory=lambda: {"rate": 0.05})
    window_days: float = 30.0
    p_open: float | None = None  # None means implied: F(window)
    leak: Leak | None = None
    noise_sd: float = 0.0
    observation_interval: timedelta = timedelta(hours=1)
    seed: int = 20260430
    start: datetime = DEFAULT_START
    volume_usdc: float = 250_000.0

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.window_days <= 0:
            raise ValueError("window_days must be positive")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be nonnegative")
        if self.p_open is not None and not 0.0 < self.p_open < 1.0:
            raise ValueError("fixed p_open must lie in (0, 1)")
        if self.observation_interval <= timedelta(0):
            raise ValueError("observation_interval must be positive")

    @property
    def model(self) -> HazardFit:
        return model_fit(self.family, self.params)

    @property
    def implied_p_open(self) -> float:
        return float(1.0 - survival_array(np.array([self.window_days]), self.model)[0])

    @classmethod
    def from_mapping(cls, obj: Mapping) -> SynthConfig:
        leak = obj.get("leak")
        return cls(
            family=obj.get("family", "exponential"),
            params=dict(obj.get("params", {"rate": 0.05})),
            window_days=float(obj.get("window_days", 30.0)),
            p_open=obj.get("p_open"),
            leak=Leak(float(leak["lead_days"]), float(leak["drift"])) if leak else None,
            noise_sd=float(obj.get("noise_sd", 0.0)),
            observation_interval=timedelta(hours=float(obj.get("observation_interval_hours", 1.0))),
            seed=int(obj.get("seed", 20260430)),
            volume_usdc=float(obj.get("volume_usdc", 250_000.0)),
        )

    def to_mapping(self) -> dict:
        out = asdict(self)
        out["observation_interval_hours"] = self.observation_interval.total_seconds() / 3600.0
        del out["observation_interval"]
        out["start"] = format_timestamp(self.start)
        return out


@dataclass(frozen=True)
class SynthMarket:
    record: MarketRecord
    series: PriceSeries
    T_event: datetime | None
    tau_days: float
    leaked: bool


def _draw_tau(cfg: SynthConfig, rng: np.random.Generator) -> float:
    p = cfg.params
    if cfg.family == "exponential":
        return float(rng.exponential(1.0 / p["rate"]))
    if cfg.family == "weibull":
        return float(p["scale"] * rng.weibull(p["k"]))
    return float(rng.lognormal(p["mu"], p["sigma"]))


def generate_market(cfg: SynthConfig, index: int = 0) -> SynthMarket:
    """One market from the ``(seed, index)`` substream.

    The opening quote is exact; later grid quotes carry clipped Gaussian
    jitter. A YES market jumps to 1.0 at the event, a NO market reaches 0.0
    at the deadline. Each pre-event grid quote is also recorded as a unit trade.
    """
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, index]))
    tau = _draw_tau(cfg, rng)
    yes = tau <= cfg.window_days
    p_open = cfg.p_open if cfg.p_open is not None else cfg.implied_p_open
    t_open = cfg.start
    deadline = t_open + timedelta(days=cfg.window_days)
    step = cfg.observation_interval.total_seconds() / _DAY
    horizon = tau if yes else cfg.window_days
    offsets = np.arange(0.0, horizon, step)
    prices = baseline_array(p_open, offsets, cfg.window_days, cfg.model)
    leaked = bool(yes and cfg.leak is not None and cfg.leak.drift > 0)
    if leaked:
        start = tau - cfg.leak.lead_days
        ramp = np.clip((offsets - start) / cfg.leak.lead_days, 0.0, 1.0)
        prices = np.clip(prices + cfg.leak.drift * ramp, 0.0, 1.0)
    if cfg.noise_sd > 0 and offsets.size > 1:
        jitter = rng.normal(0.0, cfg.noise_sd, size=offsets.size - 1)
        prices[1:] = np.clip(prices[1:] + jitter, *CLIP)
    prices[0] = p_open
    times = [t_open + timedelta(days=float(o)) for o in offsets]
    if yes:
        t_event = t_open + timedelta(days=tau)
        points = list(zip(times, prices.tolist())) + [(t_event, 1.0)]
        t_resolve = t_event + timedelta(hours=1)
    else:
        t_event = None
        points = list(zip(times, prices.tolist())) + [(deadline, 0.0)]
        t_resolve = deadline + timedelta(hours=1)
    points = [pt for i, pt in enumerate(points) if i == 0 or pt[0] > points[i - 1][0]]
    trades = tuple((t, p, 1.0) for t, p in zip(times, prices.tolist()))
    mid = f"synth-{index:06d}"
    record = MarketRecord(
        market_id=mid,
        question=f"Synthetic military event {index} by {deadline:%B} {deadline.day}, {deadline.year}?",
        T_open=t_open,
        T_resolve=t_resolve,
        volume_usdc=cfg.volume_usdc,
        outcome=Outcome.YES if yes else Outcome.NO,
        description="Synthetic deadline market.",
        D=deadline,
        category=Category.MILITARY_GEOPOLITICS,
        resolution_type=ResolutionType.DEADLINE_RESOLVED,
    )
    record = with_period(record)
    return SynthMarket(record, PriceSeries(mid, tuple(points), trades), t_event, tau, leaked)


def truth_recovery(m: SynthMarket) -> RecoveryResult:
    """The generator's own event time, at top confidence."""
    if m.T_event is None:
        return unrecovered(m.record.market_id, "tier1", "no event before deadline")
    return RecoveryResult(m.record.market_id, m.T_event, 0.9, 5, (f"synth:{m.record.market_id}",), "tier1", "ground truth")


GROUND_TRUTH_COLUMNS = ("market_id", "outcome", "tau_days", "T_event", "leaked")


def generate_cohort(cfg: SynthConfig, n: int, out_dir: str | Path) -> dict[str, Path]:
    """Write ``n`` markets as markets.csv, prices.jsonl, recoveries.jsonl and ground_truth.csv."""
    if n < 1:
        raise ValueError("n must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    markets = [generate_market(cfg, i) for i in range(n)]
    paths = {
        "markets": out / "markets.csv",
        "prices": out / "prices.jsonl",
        "recoveries": out / "recoveries.jsonl",
        "ground_truth": out / "ground_truth.csv",
        "config": out / "synth_config.json",
    }
    emit_markets([m.record for m in markets], paths["markets"])
    write_price_index([m.series for m in markets], paths["prices"])
    if paths["recoveries"].exists():
        paths["recoveries"].unlink()
    checkpoint([truth_recovery(m) for m in markets], paths["recoveries"], durable=False)
    with paths["ground_truth"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GROUND_TRUTH_COLUMNS)
        for m in markets:
            w.writerow(
                [
                    m.record.market_id,
                    m.record.outcome.value,
                    repr(m.tau_days),
                    format_timestamp(m.T_event) if m.T_event else "",
                    str(m.leaked).lower(),
                ]
            )
    paths["config"].write_text(json.dumps(cfg.to_mapping(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths
