"""Locate and load the data files shipped inside the package."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from deadline_ils.hazard import HazardFit
from deadline_ils.market_model import MarketRecord, PriceSeries, record_from_mapping, series_from_mapping
from deadline_ils.tevent_recovery import FileProvider, ReferenceCase, TIERS


def fixture_path(*parts: str) -> Path:
    """Filesystem path of a bundled fixture; the package must be installed unzipped."""
    node = resources.files("deadline_ils").joinpath("fixtures")
    for part in parts:
        node = node.joinpath(part)
    return Path(str(node))


@dataclass(frozen=True)
class ReferenceBundle:
    case: ReferenceCase
    providers: dict[str, dict]
    series: PriceSeries
    model: HazardFit
    expected: dict[str, float]

    @property
    def record(self) -> MarketRecord:
        return self.case.record

    def file_providers(self) -> dict[str, FileProvider]:
        return {t: FileProvider(t, self.providers.get(t, {})) for t in TIERS}


def load_reference(path: str | Path | None = None) -> ReferenceBundle:
    """The single-case reference market with its providers, prices and baseline model."""
    p = Path(path) if path is not None else fixture_path("iran_apr30.json")
    obj = json.loads(p.read_text(encoding="utf-8"))
    rec = record_from_mapping({k: "" if v is None else str(v) for k, v in obj["record"].items()})
    model = HazardFit(obj["model"]["family"], dict(obj["model"]["params"]), 1, 0.0)
    return ReferenceBundle(
        ReferenceCase(rec, obj["expected_date"]),
        obj.get("providers", {}),
        series_from_mapping(obj["series"]),
        model,
        obj.get("expected", {}),
    )


def load_summary() -> dict:
    """Published headline numbers, used only to check report formatting and selection labels."""
    return json.loads(fixture_path("paper_summary.json").read_text(encoding="utf-8"))
