from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import pytest

from deadline_ils.bundled import fixture_path
from deadline_ils.market_model import MarketRecord, PriceSeries, ingest_markets, load_price_index, with_period
from deadline_ils.population import AttritionTable, run_filter_chain
from deadline_ils.scoring import ScopeConfig, ScoreRecord, ScoringConfig
from deadline_ils.tevent_recovery import RecoveryResult, load_provider_fixture, recover_cascade, TIERS
from deadline_ils.typology import classify_record

ACCEPTANCE: list[tuple[str, bool, str]] = []


def record_acceptance(criterion: str, passed: bool, detail: str) -> None:
    """Log a criterion outcome; the terminal summary prints every entry."""
    ACCEPTANCE.append((criterion, passed, detail))
    print(f"{'PASS' if passed else 'FAIL'} criterion {criterion}: {detail}")


def pytest_terminal_summary(terminalreporter) -> None:
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in sorted(ACCEPTANCE, key=lambda e: _order(e[0])):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {criterion}: {detail}")


def _order(criterion: str) -> tuple[int, str]:
    digits = "".join(c for c in criterion if c.isdigit())
    return int(digits or 0), criterion


@dataclass
class PipelineRun:
    markets: list[MarketRecord]
    recoveries: dict[str, RecoveryResult]
    prices: dict[str, PriceSeries]
    table: AttritionTable
    records: list[ScoreRecord]

    @property
    def by_id(self) -> dict[str, ScoreRecord]:
        return {r.market_id: r for r in self.records}


def run_fixture(name: str, classify: bool, edge: float | None = None) -> PipelineRun:
    """Classify (if needed), recover through the file providers and run the filter chain."""
    root = fixture_path(name)
    ingest = ingest_markets(root / "markets.csv")
    assert not ingest.rejections
    markets = [with_period(classify_record(m) if classify else m) for m in ingest.records]
    providers = load_provider_fixture(root / "providers.json")
    tiers = [providers[t] for t in TIERS]
    recoveries = {m.market_id: recover_cascade(m, *tiers) for m in markets}
    prices = load_price_index(root / "prices.jsonl")
    scope = ScopeConfig() if edge is None else ScopeConfig(edge=edge)
    table, records = run_filter_chain(markets, recoveries, prices, ScoringConfig(scope=scope))
    return PipelineRun(markets, recoveries, prices, table, records)


@pytest.fixture(scope="session")
def ffic_run() -> PipelineRun:
    return run_fixture("ffic", classify=True)


@pytest.fixture(scope="session")
def ffic_expected() -> dict[str, str]:
    return json.loads(fixture_path("ffic", "expected.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def population_expected() -> dict:
    return json.loads(fixture_path("population", "expected.json").read_text(encoding="utf-8"))


@pytest.fixture
def out_dir(tmp_path: Path) -> Path:
    return tmp_path / "out"
