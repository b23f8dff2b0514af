"""Tabular outputs: the CSV companions, score files and the run manifest.

Every CSV written here opens with a ``#`` comment naming the producing
command and seed; the readers in this module skip such lines.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from deadline_ils import __version__
from deadline_ils.hazard import GroupFit, half_life, weibull_mean
from deadline_ils.market_model import format_timestamp
from deadline_ils.population import (
    BUCKETS,
    PERIODS,
    AnchorSummary,
    AttritionTable,
    DispositionRow,
    detection_thresholds,
    group_by_cell,
    group_by_period,
    summarize_cell,
    tails,
)
from deadline_ils.scoring import SCORE_COLUMNS, ScoreRecord
from deadline_ils.tevent_recovery import AgreementReport, RecoveryResult


@dataclass(frozen=True)
class Provenance:
    command: str
    seed: int

    def header(self) -> str:
        return f"# produced by: {self.command} | seed: {self.seed}\n"


def _cell(value: object, digits: int) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        if value != value:
            return ""
        return f"{value:.{digits}f}"
    if isinstance(value, datetime):
        return format_timestamp(value)
    return str(value)


def write_table(
    path: str | Path,
    columns: Sequence[str],
    rows: Iterable[Mapping[str, object]],
    provenance: Provenance,
    digits: int = 4,
) -> Path:
    """CSV with a provenance comment; floats are fixed-point at ``digits`` places."""
    buf = io.StringIO()
    buf.write(provenance.header())
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c), digits) for c in columns])
    p = Path(path)
    p.write_text(buf.getvalue(), encoding="utf-8")
    return p


def stamp(path: str | Path, provenance: Provenance) -> Path:
    """Prepend the provenance comment to a CSV written elsewhere."""
    p = Path(path)
    p.write_text(provenance.header() + p.read_text(encoding="utf-8"), encoding="utf-8")
    return p


def read_table(path: str | Path) -> list[dict[str, str]]:
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines(keepends=True) if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("".join(lines))))


def write_scores(records: Sequence[ScoreRecord], path: str | Path, provenance: Provenance) -> Path:
    """Score rows at full float precision, so a reload reproduces every field."""
    buf = io.StringIO()
    buf.write(provenance.header())
    w = csv.DictWriter(buf, fieldnames=SCORE_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow(r.to_row())
    p = Path(path)
    p.write_text(buf.getvalue(), encoding="utf-8")
    return p


def read_scores(path: str | Path) -> list[ScoreRecord]:
    rows = read_table(path)
    if rows and "market_id" not in rows[0]:
        raise ValueError(f"{path}: not a score file")
    return [ScoreRecord.from_row(r) for r in rows]


# -- companion tables -----------------------------------------------------------

ATTRITION_COLUMNS = ("stage", "label", "n", "cumulative_percent")


def attrition_rows(table: AttritionTable) -> list[dict]:
    rows = [{"stage": 0, "label": "Input markets", "n": table.n_input, "cumulative_percent": None}]
    for reason, n in table.pre_candidate.items():
        rows.append({"stage": 0, "label": f"Excluded before the candidate set: {reason}", "n": n, "cumulative_percent": None})
    for i, s in enumerate(table.stages, start=1):
        rows.append({"stage": i, "label": s.label, "n": s.n, "cumulative_percent": s.cumulative_percent})
    return rows


DISPOSITION_COLUMNS = ("disposition", "label", "count", "share_percent", "clusters", "market_ids")


def disposition_rows(rows: Sequence[DispositionRow]) -> list[dict]:
    return [
        {
            "disposition": r.disposition,
            "label": r.label,
            "count": r.count,
            "share_percent": 100.0 * r.share,
            "clusters": ";".join(r.clusters),
            "market_ids": ";".join(r.market_ids),
        }
        for r in rows
    ]


MARKET_DISPOSITION_COLUMNS = ("market_id", "disposition", "resolution_type", "category", "period", "T_event", "T_event_confidence", "p_open")


def market_disposition_rows(records: Sequence[ScoreRecord]) -> list[dict]:
    return [
        {
            "market_id": r.market_id,
            "disposition": "in_scope" if r.in_scope else r.exclusion_reason.value,
            "resolution_type": r.resolution_type,
            "category": r.category,
            "period": r.period,
            "T_event": r.T_event,
            "T_event_confidence": r.T_event_confidence,
            "p_open": r.p_open,
        }
        for r in records
    ]


def _cells() -> list[tuple[str, str]]:
    return [(b, p) for b in BUCKETS for p in PERIODS]


DISTRIBUTION_COLUMNS = ("score", "bucket", "period", "n", "mean", "median", "std", "skewness", "p10", "p90")


def distribution_rows(records: Sequence[ScoreRecord]) -> list[dict]:
    """Raw and adjusted score summaries per (bucket, period) cell, empty cells omitted."""
    rows = []
    for label, value in (("raw", lambda r: r.ils_dl), ("adjusted", lambda r: r.ils_dl_adj)):
        cells = group_by_cell(records, value)
        for b, p in _cells():
            if (b, p) not in cells:
                continue
            s = summarize_cell(cells[(b, p)], b, p)
            rows.append(
                {
                    "score": label,
                    "bucket": b,
                    "period": p,
                    "n": s.n,
                    "mean": s.mean,
                    "median": s.median,
                    "std": s.std,
                    "skewness": s.skewness,
                    "p10": s.p10,
                    "p90": s.p90,
                }
            )
    return rows


THRESHOLD_COLUMNS = ("period", "n", "quantile", "threshold", "ci_low", "ci_high", "low_n")


def threshold_rows(records: Sequence[ScoreRecord], B: int = 500, seed: int = 20260430) -> list[dict]:
    rows = []
    periods = group_by_period(records)
    for p in PERIODS:
        if p not in periods:
            continue
        for t in detection_thresholds(periods[p], B=B, seed=seed):
            rows.append(
                {
                    "period": p,
                    "n": t.n,
                    "quantile": f"{t.quantile:.2f}",
                    "threshold": t.value,
                    "ci_low": t.ci_low,
                    "ci_high": t.ci_high,
                    "low_n": t.low_n,
                }
            )
    return rows


MEDIAN_CI_COLUMNS = (
    "bucket",
    "period",
    "n",
    "median_raw",
    "raw_ci_low",
    "raw_ci_high",
    "n_adjusted",
    "median_adjusted",
    "adjusted_ci_low",
    "adjusted_ci_high",
    "median_shift",
    "fraction_positive",
    "fraction_positive_ci_low",
    "fraction_positive_ci_high",
)


def median_ci_rows(records: Sequence[ScoreRecord], B: int = 1000, seed: int = 20260430) -> list[dict]:
    """Median bootstrap CIs for raw and adjusted scores, with the fraction of positive raw scores."""
    raw = group_by_cell(records)
    adj = group_by_cell(records, lambda r: r.ils_dl_adj)
    rows = []
    for b, p in _cells():
        if (b, p) not in raw:
            continue
        s = summarize_cell(raw[(b, p)], b, p, B=B, seed=seed)
        a = summarize_cell(adj[(b, p)], b, p, B=B, seed=seed) if (b, p) in adj else None
        rows.append(
            {
                "bucket": b,
                "period": p,
                "n": s.n,
                "median_raw": s.median,
                "raw_ci_low": s.median_ci[0] if s.median_ci else None,
                "raw_ci_high": s.median_ci[1] if s.median_ci else None,
                "n_adjusted": a.n if a else 0,
                "median_adjusted": a.median if a else None,
                "adjusted_ci_low": a.median_ci[0] if a and a.median_ci else None,
                "adjusted_ci_high": a.median_ci[1] if a and a.median_ci else None,
                "median_shift": a.median - s.median if a else None,
                "fraction_positive": s.fraction_positive,
                "fraction_positive_ci_low": s.fraction_positive_ci[0] if s.fraction_positive_ci else None,
                "fraction_positive_ci_high": s.fraction_positive_ci[1] if s.fraction_positive_ci else None,
            }
        )
    return rows


ANCHOR_COLUMNS = ("n_computed", "n_robust", "robust_share", "spearman_rho_24h", "n_pairs_24h")


def anchor_rows(summary: AnchorSummary) -> list[dict]:
    return [
        {
            "n_computed": summary.n,
            "n_robust": summary.robust_count,
            "robust_share": summary.robust_share,
            "spearman_rho_24h": summary.spearman_rho_24h,
            "n_pairs_24h": summary.n_pairs,
        }
    ]


TAIL_COLUMNS = ("side", "rank", "market_id", "bucket", "period", "ils_dl", "ils_dl_adj", "anchor_robust", "question")


def tail_rows(records: Sequence[ScoreRecord], k: int = 10) -> list[dict]:
    top, bottom = tails(records, k)
    rows = []
    for side, group in (("top", top), ("bottom", bottom)):
        for i, r in enumerate(group, start=1):
            rows.append(
                {
                    "side": side,
                    "rank": i,
                    "market_id": r.market_id,
                    "bucket": r.bucket,
                    "period": r.period,
                    "ils_dl": r.ils_dl,
                    "ils_dl_adj": r.ils_dl_adj,
                    "anchor_robust": r.anchor_robust,
                    "question": r.question,
                }
            )
    return rows


FUNCTIONAL_FORM_COLUMNS = (
    "group",
    "n",
    "family",
    "params",
    "loglik",
    "aic",
    "bic",
    "ks_stat",
    "ks_p_naive",
    "ks_p_boot",
    "verdict",
    "warnings",
)


def _params(params: Mapping[str, float]) -> str:
    return ";".join(f"{k}={v:.6g}" for k, v in params.items())


def functional_form_rows(groups: Sequence[GroupFit]) -> list[dict]:
    rows = []
    for g in groups:
        if g.selection is None:
            rows.append({"group": g.group, "n": g.n, "verdict": "skipped", "warnings": g.skipped})
            continue
        for f in g.selection.fits:
            rows.append(
                {
                    "group": g.group,
                    "n": f.n,
                    "family": f.family,
                    "params": _params(f.params),
                    "loglik": f.loglik,
                    "aic": f.aic,
                    "bic": f.bic,
                    "ks_stat": f.ks_stat,
                    "ks_p_naive": f.ks_p_naive,
                    "ks_p_boot": f.ks_p_boot,
                    "verdict": f.verdict.value if f.verdict else "",
                    "warnings": "; ".join(f.warnings),
                }
            )
    return rows


HAZARD_RATE_COLUMNS = ("group", "n", "adopted", "params", "exponential_rate", "half_life_days", "mean_lead_days", "note")


def hazard_rate_rows(groups: Sequence[GroupFit]) -> list[dict]:
    rows = []
    for g in groups:
        if g.selection is None:
            rows.append({"group": g.group, "n": g.n, "note": g.skipped})
            continue
        exp = g.selection.fit_for("exponential") if any(f.family == "exponential" for f in g.selection.fits) else None
        adopted = g.selection.adopted_fit
        mean = None
        if adopted is not None:
            p = adopted.params
            if adopted.family == "exponential":
                mean = 1.0 / p["rate"]
            elif adopted.family == "weibull":
                mean = weibull_mean(p["k"], p["scale"])
            else:
                mean = math.exp(p["mu"] + p["sigma"] ** 2 / 2)
        rows.append(
            {
                "group": g.group,
                "n": g.n,
                "adopted": g.selection.adopted or "none",
                "params": _params(adopted.params) if adopted else "",
                "exponential_rate": exp.params["rate"] if exp else None,
                "half_life_days": half_life(exp.params["rate"]) if exp else None,
                "mean_lead_days": mean,
                "note": g.selection.note,
            }
        )
    return rows


VALIDATION_COLUMNS = (
    "bucket",
    "sampled_n",
    "comparable_n",
    "exact_date_rate",
    "within_24h_rate",
    "within_6h_rate",
    "source_overlap_rate",
)


def validation_rows(report: AgreementReport) -> list[dict]:
    rows = []
    for label, r in [*report.by_bucket.items(), ("overall", report.overall)]:
        rows.append(
            {
                "bucket": label,
                "sampled_n": r.sampled_n,
                "comparable_n": r.comparable_n,
                "exact_date_rate": r.exact_rate,
                "within_24h_rate": r.within_24h_rate,
                "within_6h_rate": r.within_6h_rate,
                "source_overlap_rate": r.source_overlap_rate,
            }
        )
    return rows


DISAGREEMENT_COLUMNS = ("market_id", "bucket", "triage", "first_T_event", "second_T_event", "delta_hours")


def disagreement_rows(report: AgreementReport) -> list[dict]:
    return [asdict(d) for d in report.disagreements]


RECOVERY_COLUMNS = ("stage", "n", "share_of_entering")


def recovery_rows(results: Mapping[str, RecoveryResult]) -> list[dict]:
    """Cumulative confidence-level counts plus mean and median confidence of dated results."""
    rs = list(results.values())
    n = len(rs)
    dated = [r for r in rs if r.T_event is not None]
    rows = [
        {"stage": "entering recovery", "n": n, "share_of_entering": 1.0 if n else None},
        {"stage": "any timestamp", "n": len(dated), "share_of_entering": len(dated) / n if n else None},
    ]
    for level in (0.7, 0.8, 0.9):
        k = sum(r.confidence >= level for r in rs)
        rows.append({"stage": f"confidence >= {level}", "n": k, "share_of_entering": k / n if n else None})
    if dated:
        confs = sorted(r.confidence for r in dated)
        mid = len(confs) // 2
        median = confs[mid] if len(confs) % 2 else (confs[mid - 1] + confs[mid]) / 2
        rows.append({"stage": "mean confidence (dated)", "n": len(dated), "share_of_entering": sum(confs) / len(confs)})
        rows.append({"stage": "median confidence (dated)", "n": len(dated), "share_of_entering": median})
    return rows


# -- manifest ----------------------------------------------------------------------


def _now() -> str:
    """Wall-clock UTC, or ``SOURCE_DATE_EPOCH`` when set for reproducible runs."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return format_timestamp(t.replace(microsecond=0))


@dataclass
class RunManifest:
    command: str
    inputs: dict[str, str]
    seed: int
    b_values: dict[str, int]
    period_boundary: str
    output_dir: str
    tool_version: str = __version__
    started: str = field(default_factory=_now)
    finished: str = ""
    outputs: list[str] = field(default_factory=list)
    status: str = "incomplete"

    def add(self, path: str | Path) -> None:
        name = Path(path).as_posix()
        if name in self.outputs:
            raise ValueError(f"{name} registered twice")
        self.outputs.append(name)

    def write(self, path: str | Path, status: str = "complete") -> Path:
        self.status = status
        self.finished = _now()
        p = Path(path)
        p.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return p
