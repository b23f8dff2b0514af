"""Regenerate the frozen fixture files under src/deadline_ils/fixtures/.

Derived quantities (the reference market's opening time, the constructed
Weibull parameters) are solved here with mpmath, independently of the
package's own numerics, and then written out as literals. Run from the repo
root: ``python3 scripts/build_fixtures.py``.
"""

from __future__ import annotations

import csv
import json
from datetime import datetime, timedelta, timezone
from pathlib import Path

import mpmath as mp

OUT = Path(__file__).resolve().parents[1] / "src" / "deadline_ils" / "fixtures"
UTC = timezone.utc
mp.mp.dps = 40

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


def ts(dt: datetime) -> str:
    return dt.astimezone(UTC).strftime("%Y-%m-%dT%H:%M:%SZ")


def dt(text: str) -> datetime:
    return datetime.fromisoformat(text.replace("Z", "+00:00"))


def write_csv(path: Path, rows: list[dict]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=MARKET_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({c: r.get(c, "") for c in MARKET_COLUMNS})


def write_jsonl(path: Path, objs: list[dict]) -> None:
    path.write_text("".join(json.dumps(o, ensure_ascii=False) + "\n" for o in objs), encoding="utf-8")


def flat_series(market_id: str, start: datetime, end: datetime, price: float, step: timedelta) -> list[list]:
    pts, t = [], start
    while t < end:
        pts.append([ts(t), price])
        t += step
    return pts


# ---------------------------------------------------------------------------
# FFIC inventory: 32 markets, 8 cases
# ---------------------------------------------------------------------------

EC = "Resolves per the Electoral College vote as reported by major networks and certified results."
ANY_FORM = "Resolves YES on any form of military engagement between US forces and Venezuelan forces or territory."
WP = "Resolves YES if the President formally invokes War Powers authority, including but not limited to a notification to Congress."
DE_FACTO = "A ceasefire counts if it is formally announced or holds de facto per the consensus of credible reporting."


def ffic_markets() -> list[dict]:
    m = []

    def add(mid, cluster, q, t_open, t_resolve, outcome, volume, desc=""):
        m.append(
            dict(
                market_id=mid,
                question=q,
                description=desc,
                T_open=t_open,
                T_resolve=t_resolve,
                volume_usdc=volume,
                outcome=outcome,
                cluster=cluster,
            )
        )

    c = "fficd-001"
    add("fficd-001-a", c, "Will Donald Trump win the 2024 US Presidential Election?", "2024-01-04T18:00:00Z", "2024-11-06T11:00:00Z", "YES", 1373000000, EC)
    add("fficd-001-b", c, "Will Kamala Harris win the 2024 US Presidential Election?", "2024-01-04T18:00:00Z", "2024-11-06T11:00:00Z", "NO", 1037000000, EC)
    add("fficd-001-c", c, "Will any other Republican Politician win the 2024 US Presidential Election?", "2024-01-04T18:00:00Z", "2024-11-06T11:00:00Z", "NO", 38000000, EC)
    add("fficd-001-d", c, "Will Michelle Obama win the 2024 US Presidential Election?", "2024-01-04T18:00:00Z", "2024-11-06T11:00:00Z", "NO", 153000000, EC)
    c = "fficd-002"
    add("fficd-002-a", c, "Iran strike on Israel today?", "2024-10-01T06:00:00Z", "2024-10-01T23:59:59Z", "YES", 480000, "Resolves YES if Iran launches a strike on Israeli territory on October 1, 2024 (ET).")
    add("fficd-002-b", c, "Another Iran strike on Israel by Friday?", "2024-10-02T06:00:00Z", "2024-10-05T04:00:00Z", "NO", 410000, "Resolves YES if Iran launches another strike on Israeli territory before the end of Friday.")
    add("fficd-002-c", c, "Iran strike on Israel by Nov 8?", "2024-10-02T06:00:00Z", "2024-11-09T05:00:00Z", "NO", 2650000, "Resolves YES if Iran launches a new strike on Israeli territory by the deadline.")
    c = "fficd-003"
    add("fficd-003-a", c, "US forces enter Iran by April 30?", "2026-03-05T15:00:00Z", "2026-04-03T20:00:00Z", "YES", 5400000, "Resolves YES if US ground forces enter Iranian territory by April 30, 2026.")
    add("fficd-003-b", c, "US x Iran ceasefire by April 7?", "2026-03-20T12:00:00Z", "2026-04-07T02:00:00Z", "YES", 3100000, "Resolves YES if the US and Iran announce a ceasefire by April 7, 2026.")
    add("fficd-003-c", c, "Khamenei out as Supreme Leader by Feb 28?", "2026-01-10T12:00:00Z", "2026-03-01T05:00:00Z", "NO", 8200000, "Resolves YES if Ali Khamenei ceases to be Supreme Leader.")
    add("fficd-003-d", c, "Israel x Hezbollah ceasefire by April 18, 2026?", "2026-03-01T12:00:00Z", "2026-04-18T23:00:00Z", "YES", 1900000, DE_FACTO)
    add("fficd-003-e", c, "US strikes Iran by February 28, 2026?", "2026-01-05T12:00:00Z", "2026-02-28T20:00:00Z", "YES", 12500000, "Resolves YES on a US military strike on Iran.")
    add("fficd-003-f", c, "Khamenei out as Supreme Leader by March 31?", "2026-01-10T12:00:00Z", "2026-04-01T05:00:00Z", "NO", 6300000, "Resolves YES if Ali Khamenei ceases to be Supreme Leader.")
    c = "fficd-004"
    add("fficd-004-a", c, "Maduro in U.S. custody by January 31?", "2025-12-01T12:00:00Z", "2026-01-03T18:00:00Z", "YES", 7700000, "Resolves YES if Nicolas Maduro is in US custody.")
    add("fficd-004-b", c, "US x Venezuela engagement by Jan 15, 2026?", "2025-11-20T12:00:00Z", "2026-01-03T12:00:00Z", "YES", 4100000, ANY_FORM)
    add("fficd-004-c", c, "US x Venezuela engagement by Jan 31, 2026?", "2025-11-20T12:00:00Z", "2026-01-03T12:00:00Z", "YES", 2900000, ANY_FORM)
    add("fficd-004-d", c, "Trump invokes War Powers (Venezuela) by Jan 9?", "2025-12-10T12:00:00Z", "2026-01-10T05:00:00Z", "NO", 640000, WP)
    add("fficd-004-e", c, "Trump invokes War Powers (Venezuela) by Jan 31?", "2025-12-10T12:00:00Z", "2026-02-01T05:00:00Z", "NO", 520000, WP)
    add("fficd-004-f", c, "US x Venezuela engagement by Mar 31, 2026?", "2025-12-15T12:00:00Z", "2026-01-03T12:00:00Z", "YES", 1500000, ANY_FORM)
    add("fficd-004-g", c, "Nicolás Maduro seen in public by January 5?", "2025-12-20T12:00:00Z", "2026-01-06T05:00:00Z", "NO", 390000, "Resolves YES if Maduro appears in public, per verified footage.")
    add("fficd-004-h", c, "Will the U.S. invade Venezuela by Jan 31, 2026?", "2025-10-01T12:00:00Z", "2026-02-01T05:00:00Z", "NO", 6900000, "Resolves YES if US forces launch a ground invasion of Venezuela.")
    add("fficd-004-i", c, "US x Venezuela engagement by December 31?", "2025-10-15T12:00:00Z", "2026-01-01T05:00:00Z", "NO", 3300000, "Resolves YES on a US kinetic strike on Venezuelan territory.")
    add("fficd-004-j", c, "US x Venezuela engagement by November 30?", "2025-10-15T12:00:00Z", "2025-12-01T05:00:00Z", "NO", 2200000, "Resolves YES on a US kinetic strike on Venezuelan territory.")
    add("fficd-004-k", c, "US forces in Venezuela again by Jan 31, 2026?", "2026-01-05T12:00:00Z", "2026-02-01T05:00:00Z", "NO", 870000, "Resolves YES if US forces return to Venezuelan territory.")
    c = "fficd-005"
    add("fficd-005-a", c, "Bitcoin ETF approved by Jan 15?", "2023-12-01T00:00:00Z", "2024-01-11T01:00:00Z", "YES", 12000000, "Resolves YES if the SEC approves a spot Bitcoin ETF before its decision deadline.")
    c = "fficd-006"
    add("fficd-006-a", c, "Will Gene Hackman be ranked #1 in Year in Search Passings?", "2025-11-01T12:00:00Z", "2025-12-04T17:00:00Z", "NO", 210000, "Resolves per the Google Year in Search list.")
    add("fficd-006-b", c, "Will Ismail Haniyeh be ranked #1 in Year in Search Passings?", "2025-11-01T12:00:00Z", "2025-12-04T17:00:00Z", "NO", 180000, "Resolves per the Google Year in Search list.")
    add("fficd-006-c", c, "Will Zendaya be ranked #1 in Year in Search Actors?", "2025-11-01T12:00:00Z", "2025-12-04T17:00:00Z", "YES", 240000, "Resolves per the Google Year in Search list.")
    c = "fficd-007"
    add("fficd-007-a", c, "Will Biden pardon SBF?", "2024-06-01T12:00:00Z", "2025-01-20T17:00:00Z", "NO", 1100000, "Resolves YES if Sam Bankman-Fried receives a presidential pardon.")
    add("fficd-007-b", c, "SBF sentenced to 50+ years?", "2024-03-28T14:00:00Z", "2024-03-28T16:00:00Z", "NO", 320000, "Resolves YES if the sentence handed down is 50 years or more.")
    add("fficd-007-c", c, "FTX doesn't start payouts in 2024?", "2024-05-10T12:00:00Z", "2025-01-01T05:00:00Z", "YES", 760000, "Resolves YES if FTX creditors receive no distributions in 2024.")
    c = "fficd-008"
    add("fficd-008-a", c, "Will Nicolae Ciucă win the 2024 Romanian election?", "2024-09-01T12:00:00Z", "2024-11-25T12:00:00Z", "NO", 2400000, "Resolves YES if Ciucă wins the presidency.")
    return m


FFIC_EXPECTED = {
    "fficd-001-a": "unclassifiable",
    "fficd-001-b": "unclassifiable",
    "fficd-001-c": "unclassifiable",
    "fficd-001-d": "unclassifiable",
    "fficd-002-a": "unclassifiable",
    "fficd-002-b": "deadline_no",
    "fficd-002-c": "deadline_no",
    "fficd-003-a": "low_confidence",
    "fficd-003-b": "edge_effect",
    "fficd-003-c": "unclassifiable",
    "fficd-003-d": "unclassifiable",
    "fficd-003-e": "unclassifiable",
    "fficd-003-f": "unclassifiable",
    "fficd-004-a": "unclassifiable",
    "fficd-004-b": "unclassifiable",
    "fficd-004-c": "unclassifiable",
    "fficd-004-d": "unclassifiable",
    "fficd-004-e": "unclassifiable",
    "fficd-004-f": "unclassifiable",
    "fficd-004-g": "category_other",
    "fficd-004-h": "deadline_no",
    "fficd-004-i": "deadline_no",
    "fficd-004-j": "deadline_no",
    "fficd-004-k": "deadline_no",
    "fficd-005-a": "in_scope",
    "fficd-006-a": "unclassifiable",
    "fficd-006-b": "unclassifiable",
    "fficd-006-c": "unclassifiable",
    "fficd-007-a": "unclassifiable",
    "fficd-007-b": "compute_error",
    "fficd-007-c": "unclassifiable",
    "fficd-008-a": "edge_effect",
}


def ffic_providers() -> dict:
    return {
        "tier1": {
            "fficd-003-a": {"T_event": "2026-04-03T12:00:00Z", "n_sources": 2, "agreement": "partial", "reasoning": "two outlets disagree on the crossing date"},
            "fficd-003-b": {"T_event": "2026-04-06T18:00:00Z", "n_sources": 4, "agreement": "full"},
            "fficd-005-a": {"T_event": "2024-01-10T21:15:00Z", "n_sources": 6, "agreement": "full", "reasoning": "SEC order approving spot bitcoin ETPs"},
            "fficd-007-b": {"fail": True},
            "fficd-008-a": {"T_event": "2024-11-24T19:00:00Z", "n_sources": 5, "agreement": "full"},
        },
        "tier2": {
            "fficd-003-a": {"T_event": "2026-04-03T12:00:00Z", "n_sources": 1, "agreement": "full"},
            "fficd-007-b": {"T_event": "2024-03-28T14:10:00Z", "n_sources": 3, "agreement": "full"},
        },
        "tier3": {},
    }


def ffic_prices() -> list[dict]:
    out = []
    # ceasefire market opens at the upper edge
    out.append({"market_id": "fficd-003-b", "points": flat_series("fficd-003-b", dt("2026-03-20T12:00:00Z"), dt("2026-04-06T18:00:00Z"), 0.92, timedelta(hours=12)) + [["2026-04-06T18:30:00Z", 0.99]]})
    # Bitcoin ETF: 0.60 at the open, 0.6048 one minute before the approval
    pts = []
    t = dt("2023-12-01T00:00:00Z")
    walk = [0.60, 0.62, 0.58, 0.61, 0.57, 0.63, 0.59, 0.64, 0.60, 0.66]
    i = 0
    while t < dt("2024-01-10T18:00:00Z"):
        pts.append([ts(t), walk[i % len(walk)]])
        t += timedelta(days=4)
        i += 1
    pts.append(["2024-01-10T19:15:00Z", 0.6048])
    pts.append(["2024-01-10T21:30:00Z", 0.98])
    trades = [[p[0], p[1], 1500.0] for p in pts[:-1]]
    out.append({"market_id": "fficd-005-a", "points": pts, "trades": trades})
    # SBF: quotes begin 30 minutes after the open, after the event
    out.append({"market_id": "fficd-007-b", "points": [["2024-03-28T14:30:00Z", 0.35], ["2024-03-28T15:00:00Z", 0.02]]})
    out.append({"market_id": "fficd-008-a", "points": flat_series("fficd-008-a", dt("2024-09-01T12:00:00Z"), dt("2024-11-24T18:00:00Z"), 0.08, timedelta(days=2))})
    return out


# ---------------------------------------------------------------------------
# Iran-Apr30 reference market
# ---------------------------------------------------------------------------

POST_2024_EXP_RATE = mp.mpf("0.042")
REF_K = mp.mpf("0.70")
REF_P_OPEN = mp.mpf("0.35")
REF_RAW = mp.mpf("0.113")
REF_ADJ = mp.mpf("0.156")
REF_T_EVENT = dt("2026-04-03T12:00:00Z")
REF_D = dt("2026-04-30T23:59:59Z")


def reference_fixture() -> dict:
    # Weibull shape fixed at 0.70; scale chosen so the mean lead time matches the exponential fit (1/0.042 days)
    scale = mp.nstr((1 / POST_2024_EXP_RATE) / mp.gamma(1 + 1 / REF_K), 6)
    scale = mp.mpf(scale)
    p_event = REF_P_OPEN + REF_RAW * (1 - REF_P_OPEN)
    target_baseline = p_event - REF_ADJ * (1 - REF_P_OPEN)
    anchor = REF_T_EVENT - timedelta(seconds=60)
    gap = mp.mpf((REF_D - anchor).total_seconds()) / 86400

    def S(x):
        return mp.e ** (-((x / scale) ** REF_K)) if x > 0 else mp.mpf(1)

    def baseline(x):
        return REF_P_OPEN * (S(x) - S(x + gap)) / (1 - S(x + gap))

    x = mp.findroot(lambda v: baseline(v) - target_baseline, (mp.mpf("0.01"), mp.mpf("60")), solver="bisect")
    t_open = anchor - timedelta(days=float(x))
    t_open = t_open.replace(second=0, microsecond=0)
    x_r = mp.mpf((anchor - t_open).total_seconds()) / 86400
    adj = (p_event - baseline(x_r)) / (1 - REF_P_OPEN)
    assert abs(adj - REF_ADJ) < mp.mpf("0.0005"), adj
    t_open_s = ts(t_open)
    points = flat_series("iran-apr30", t_open, REF_T_EVENT - timedelta(minutes=10), float(REF_P_OPEN), timedelta(hours=6))
    points.append([ts(REF_T_EVENT - timedelta(minutes=10)), float(mp.nstr(p_event, 6))])
    points.append([ts(REF_T_EVENT + timedelta(minutes=30)), 0.97])
    trades = [[p[0], p[1], 250.0] for p in points[:-1]]
    return {
        "record": {
            "market_id": "iran-apr30",
            "question": "US forces enter Iran by April 30?",
            "description": "Single-case reference market with a manually established event date.",
            "T_open": t_open_s,
            "T_resolve": "2026-04-03T20:00:00Z",
            "D": ts(REF_D),
            "volume_usdc": 5400000,
            "outcome": "YES",
            "category": "military_geopolitics",
            "resolution_type": "deadline_resolved",
            "period": "post_2024",
            "cluster": "fficd-003",
        },
        "expected_date": "2026-04-03",
        "providers": {
            "tier1": {"iran-apr30": {"T_event": ts(REF_T_EVENT), "n_sources": 3, "agreement": "full"}},
            "tier2": {},
            "tier3": {},
        },
        "series": {"market_id": "iran-apr30", "points": points, "trades": trades},
        "model": {"family": "weibull", "params": {"k": float(REF_K), "scale": float(scale)}},
        "expected": {"ils_dl": 0.113, "ils_dl_adj": 0.156, "oracle_ils_dl_adj": float(mp.nstr(adj, 10))},
        "construction": "Weibull shape 0.70 with scale giving mean 1/0.042 days; T_open solved so the adjusted score is 0.156 at p_open 0.35",
    }


# ---------------------------------------------------------------------------
# 50-pair second-pass validation sample
# ---------------------------------------------------------------------------

# per bucket: (exact, near-miss 6-24h, minor > 24h, major, non-comparable)
VALIDATION_PLAN = {
    "regulatory_announcement": (6, 1, 1, 4, 0),
    "regulatory_formal": (5, 2, 2, 5, 4),
    "milgeo_corporate": (15, 2, 1, 1, 1),
}


def validation_pairs() -> list[dict]:
    out = []
    base = dt("2025-02-03T00:00:00Z")
    k = 0
    for bucket, (exact, near, minor, major, noncomp) in VALIDATION_PLAN.items():
        kinds = ["exact"] * exact + ["near"] * near + ["minor"] * minor + ["major"] * major + ["noncomp"] * noncomp
        for kind in kinds:
            mid = f"val-{k:03d}"
            day = base + timedelta(days=7 * k)
            first_t = day + timedelta(hours=10 + (k % 5))
            if kind == "exact":
                second_t = first_t + timedelta(hours=(k % 4) + 1)
            elif kind == "near":
                first_t = day + timedelta(hours=20)
                second_t = first_t + timedelta(hours=9 + (k % 3) * 4)
            elif kind == "minor":
                second_t = first_t + timedelta(days=2 + (k % 4), hours=3)
            elif kind == "major":
                second_t = first_t + timedelta(days=10 + 3 * (k % 5))
            else:
                second_t = None
            first = {"T_event": ts(first_t), "confidence": 0.8, "n_sources": 3, "sources": [f"https://source-a.example/{mid}/{i}" for i in range(3)], "tier_used": "tier2"}
            if second_t is None:
                second = {"T_event": None, "confidence": 0.0, "n_sources": 0, "sources": [], "tier_used": "tier1"}
            else:
                second = {"T_event": ts(second_t), "confidence": 0.7, "n_sources": 2, "sources": [f"https://source-b.example/{mid}/{i}" for i in range(2)], "tier_used": "tier1"}
            out.append({"market_id": mid, "bucket": bucket, "kind": kind, "first_pass": first, "second_pass": second})
            k += 1
    return out


# ---------------------------------------------------------------------------
# Synthetic population: every exclusion reason, hand-counted
# ---------------------------------------------------------------------------


def population() -> tuple[list[dict], dict, list[dict], dict]:
    rows, providers, prices, expected = [], {"tier1": {}, "tier2": {}, "tier3": {}}, [], {}
    day = timedelta(days=1)

    def market(i, disposition, *, q, cat, sub="", rtype, outcome="YES", vol=150000, t_open, t_resolve, D="", period=None, alt=None):
        mid = f"pop-{i:03d}"
        t_res = dt(t_resolve)
        rows.append(
            dict(
                market_id=mid,
                question=q,
                description="",
                T_open=t_open,
                T_resolve=t_resolve,
                D=D,
                volume_usdc=vol,
                outcome=outcome,
                category=cat,
                subcategory=sub,
                resolution_type=rtype,
                period=period or ("pre_2024" if t_res < dt("2024-11-01T00:00:00Z") else "post_2024"),
            )
        )
        expected[mid] = {"default": disposition, "edge_0.47": alt or disposition}
        return mid

    def recover(mid, t_event, n=5, agreement="full", tier="tier1"):
        providers[tier][mid] = {"T_event": t_event, "n_sources": n, "agreement": agreement}

    def series(mid, t_open, t_event, p_open, p_event, step=timedelta(hours=6), lag=timedelta(0)):
        t0, te = dt(t_open) + lag, dt(t_event)
        pts = flat_series(mid, t0, te - timedelta(hours=3), p_open, step)
        pts.append([ts(te - timedelta(hours=3)), p_event])
        pts.append([ts(te + timedelta(minutes=20)), 0.99])
        prices.append({"market_id": mid, "points": pts, "trades": [[p[0], p[1], 100.0] for p in pts[:-1]]})

    # pre-candidate
    market(1, "category_other", q="Will it snow in Paris on Christmas?", cat="other", rtype="event_resolved", t_open="2025-12-01T00:00:00Z", t_resolve="2025-12-26T00:00:00Z")
    market(2, "category_other", q="Lakers vs Celtics?", cat="other", rtype="unclassifiable", t_open="2024-02-01T00:00:00Z", t_resolve="2024-02-02T00:00:00Z")
    market(3, "category_other", q="Bitcoin above 100k by March 1?", cat="other", rtype="deadline_resolved", D="2025-03-01T23:59:59Z", outcome="NO", t_open="2025-01-01T00:00:00Z", t_resolve="2025-03-02T00:00:00Z")
    market(4, "low_volume", q="Fed rate cut in June?", cat="regulatory", sub="regulatory_announcement", rtype="event_resolved", vol=20000, t_open="2024-05-01T00:00:00Z", t_resolve="2024-06-13T00:00:00Z")
    market(5, "low_volume", q="Russia x Ukraine ceasefire by May 1?", cat="military_geopolitics", rtype="deadline_resolved", D="2025-05-01T23:59:59Z", vol=49999.99, outcome="NO", t_open="2025-03-01T00:00:00Z", t_resolve="2025-05-02T00:00:00Z")
    # unclassifiable x6
    for i in range(6, 12):
        market(i, "unclassifiable", q=f"Ambiguous policy outcome {i}?", cat=("regulatory" if i % 2 else "corporate_disclosure"), sub=("regulatory_formal" if i % 2 else ""), rtype="unclassifiable", t_open="2025-01-10T00:00:00Z", t_resolve="2025-04-10T00:00:00Z")
    # deadline NO x5
    for i in range(12, 17):
        market(i, "deadline_no", q=f"Deal signed by June 30 ({i})?", cat="military_geopolitics", rtype="deadline_resolved", D="2025-06-30T23:59:59Z", outcome="NO", t_open="2025-04-01T00:00:00Z", t_resolve="2025-07-01T00:00:00Z")
    # low confidence x5
    market(17, "low_confidence", q="Agency rule finalized by May 30?", cat="regulatory", sub="regulatory_formal", rtype="deadline_resolved", D="2025-05-30T23:59:59Z", t_open="2025-03-01T00:00:00Z", t_resolve="2025-05-01T00:00:00Z")
    m = market(18, "low_confidence", q="Merger closes by August 1?", cat="corporate_disclosure", rtype="deadline_resolved", D="2025-08-01T23:59:59Z", t_open="2025-05-01T00:00:00Z", t_resolve="2025-07-15T00:00:00Z")
    recover(m, "2025-07-14T12:00:00Z", n=1, agreement="full")
    m = market(19, "low_confidence", q="Troops withdrawn by September 1?", cat="military_geopolitics", rtype="deadline_resolved", D="2025-09-01T23:59:59Z", t_open="2025-06-01T00:00:00Z", t_resolve="2025-08-01T00:00:00Z")
    for tier in ("tier1", "tier2", "tier3"):
        providers[tier][m] = {"fail": True}
    m = market(20, "low_confidence", q="Nominee confirmed by July 31?", cat="regulatory", sub="regulatory_formal", rtype="deadline_resolved", D="2025-07-31T23:59:59Z", t_open="2025-05-01T00:00:00Z", t_resolve="2025-06-20T00:00:00Z")
    recover(m, "2025-06-25T00:00:00Z", n=5)  # after T_resolve: rejected by the cascade
    m = market(21, "low_confidence", q="Summit held by October 1?", cat="military_geopolitics", rtype="deadline_resolved", D="2025-10-01T23:59:59Z", t_open="2025-07-01T00:00:00Z", t_resolve="2025-09-01T00:00:00Z")
    recover(m, "2025-08-30T00:00:00Z", n=2, agreement="partial", tier="tier1")
    recover(m, "2025-08-30T00:00:00Z", n=0, agreement="none", tier="tier2")
    # negative tau x2
    m = market(22, "negative_tau", q="Tariff announced by March 15?", cat="regulatory", sub="regulatory_announcement", rtype="deadline_resolved", D="2025-03-15T23:59:59Z", t_open="2025-02-01T00:00:00Z", t_resolve="2025-02-01T06:00:00Z")
    recover(m, "2025-02-01T00:00:00Z", n=3)
    m = market(23, "negative_tau", q="Earnings beat on Q3 call?", cat="corporate_disclosure", rtype="event_resolved", t_open="2024-10-20T00:00:00Z", t_resolve="2024-10-30T00:00:00Z")
    recover(m, "2024-10-18T12:00:00Z", n=3)
    # no coverage x3
    m = market(24, "no_coverage", q="Strike on port by May 20?", cat="military_geopolitics", rtype="deadline_resolved", D="2025-05-20T23:59:59Z", t_open="2025-04-01T00:00:00Z", t_resolve="2025-04-20T00:00:00Z")
    recover(m, "2025-04-19T08:00:00Z")
    m = market(25, "no_coverage", q="CPI above 3% in April?", cat="regulatory", sub="regulatory_announcement", rtype="event_resolved", t_open="2025-04-01T00:00:00Z", t_resolve="2025-05-13T14:00:00Z")
    recover(m, "2025-05-13T12:30:00Z")
    series(m, "2025-04-01T00:00:00Z", "2025-05-13T12:30:00Z", 0.45, 0.5, lag=timedelta(hours=3))
    m = market(26, "no_coverage", q="CEO resigns by June 1?", cat="corporate_disclosure", rtype="deadline_resolved", D="2025-06-01T23:59:59Z", t_open="2025-03-01T00:00:00Z", t_resolve="2025-05-01T00:00:00Z")
    recover(m, "2025-04-30T16:00:00Z")
    series(m, "2025-03-01T00:00:00Z", "2025-04-30T16:00:00Z", 0.3, 0.35, lag=day)
    # edge effect x3 (one becomes in-scope, one trivial, under edge 0.47)
    m = market(27, "edge_effect", q="Ceasefire extended by January 20?", cat="military_geopolitics", rtype="deadline_resolved", D="2025-01-20T23:59:59Z", t_open="2025-01-01T00:00:00Z", t_resolve="2025-01-15T00:00:00Z", alt="in_scope")
    recover(m, "2025-01-14T12:00:00Z")
    series(m, "2025-01-01T00:00:00Z", "2025-01-14T12:00:00Z", 0.9, 0.95)
    m = market(28, "edge_effect", q="Acquisition approved by regulators?", cat="regulatory", sub="regulatory_formal", rtype="event_resolved", t_open="2024-03-01T00:00:00Z", t_resolve="2024-05-01T00:00:00Z")
    recover(m, "2024-04-30T15:00:00Z")
    series(m, "2024-03-01T00:00:00Z", "2024-04-30T15:00:00Z", 0.02, 0.05)
    m = market(29, "edge_effect", q="Embassy reopened by March 31?", cat="military_geopolitics", rtype="deadline_resolved", D="2024-03-31T23:59:59Z", t_open="2024-02-01T00:00:00Z", t_resolve="2024-03-10T00:00:00Z", alt="trivial_move")
    recover(m, "2024-03-09T09:00:00Z")
    series(m, "2024-02-01T00:00:00Z", "2024-03-09T09:00:00Z", 0.96, 0.97)
    # compute error x1
    m = market(30, "compute_error", q="Verdict announced Friday?", cat="regulatory", sub="regulatory_announcement", rtype="event_resolved", t_open="2024-06-07T14:00:00Z", t_resolve="2024-06-07T18:00:00Z")
    recover(m, "2024-06-07T14:05:00Z")
    prices.append({"market_id": m, "points": [["2024-06-07T14:20:00Z", 0.4], ["2024-06-07T15:00:00Z", 0.9]]})
    # in scope x10 across buckets and periods
    plan = [
        (31, "regulatory", "regulatory_announcement", "event_resolved", "2024-01-02T00:00:00Z", "2024-01-31T19:00:00Z", 0.40, 0.30),
        (32, "regulatory", "regulatory_announcement", "event_resolved", "2025-02-01T00:00:00Z", "2025-03-19T18:00:00Z", 0.55, 0.40),
        (33, "regulatory", "regulatory_formal", "deadline_resolved", "2024-02-01T00:00:00Z", "2024-04-10T16:00:00Z", 0.30, 0.35),
        (34, "regulatory", "regulatory_formal", "deadline_resolved", "2025-01-15T00:00:00Z", "2025-03-01T12:00:00Z", 0.45, 0.20),
        (35, "regulatory", "regulatory_formal", "deadline_resolved", "2025-05-01T00:00:00Z", "2025-06-20T12:00:00Z", 0.25, 0.60),
        (36, "military_geopolitics", "", "deadline_resolved", "2024-05-01T00:00:00Z", "2024-06-01T08:00:00Z", 0.35, 0.30),
        (37, "military_geopolitics", "", "deadline_resolved", "2025-06-01T00:00:00Z", "2025-06-25T03:00:00Z", 0.50, 0.45),
        (38, "corporate_disclosure", "", "event_resolved", "2024-07-01T00:00:00Z", "2024-07-25T20:30:00Z", 0.60, 0.70),
        (39, "corporate_disclosure", "", "deadline_resolved", "2025-07-01T00:00:00Z", "2025-08-14T15:00:00Z", 0.20, 0.15),
        (40, "military_geopolitics", "", "event_resolved", "2025-09-01T00:00:00Z", "2025-10-10T10:00:00Z", 0.65, 0.50),
    ]
    for i, cat, sub, rtype, t_open, t_event, p0, pe in plan:
        te = dt(t_event)
        d_line = ts((te + timedelta(days=20)).replace(hour=23, minute=59, second=59)) if rtype == "deadline_resolved" else ""
        m = market(i, "in_scope", q=f"Scored market {i}?", cat=cat, sub=sub, rtype=rtype, D=d_line, t_open=t_open, t_resolve=ts(te + timedelta(hours=2)))
        recover(m, t_event, n=3 + (i % 3))
        series(m, t_open, t_event, p0, pe)
    # stage counts below are tallied by hand from the dispositions above, not by running the pipeline
    counts = {
        "default": {"n_input": 40, "pre_candidate": {"category_other": 3, "low_volume": 2}, "stages": [35, 29, 24, 19, 17, 14, 10]},
        "edge_0.47": {"n_input": 40, "pre_candidate": {"category_other": 3, "low_volume": 2}, "stages": [35, 29, 24, 19, 17, 14, 11]},
    }
    return rows, providers, prices, {"dispositions": expected, "counts": counts}


# ---------------------------------------------------------------------------
# Published summary numbers (report-formatting assertions only)
# ---------------------------------------------------------------------------


def paper_summary() -> dict:
    return {
        "filter_chain": [
            ["Insider-relevant subpopulation, category + vol >= $50K", 12708, 100.0],
            ["After dropping unclassifiable resolution type", 2375, 18.7],
            ["After dropping deadline-resolved NO outcomes", 1151, 9.1],
            ["T_event recovered with confidence >= 0.7", 442, 3.5],
            ["Full CLOB price coverage from T_open", 358, 2.8],
            ["ILS^dl computed (scope conditions satisfied)", 88, 0.7],
        ],
        "functional_form": {
            "post_2024": {
                "n": 57,
                "fits": [
                    {"family": "exponential", "aic": 476.59, "bic": 478.63, "ks_p_naive": 0.0002, "ks_p_boot": "<0.01", "verdict": "rejected"},
                    {"family": "weibull", "aic": 454.66, "bic": 458.74, "ks_p_naive": 0.78, "ks_p_boot": ">0.50", "verdict": "adopted"},
                    {"family": "lognormal", "aic": 454.70, "bic": 458.78, "ks_p_naive": 0.79, "ks_p_boot": ">0.50", "verdict": "adequate"},
                ],
            },
            "pre_2024": {
                "n": 33,
                "fits": [
                    {"family": "exponential", "aic": 233.99, "bic": 235.49, "ks_p_naive": 0.073, "ks_p_boot": 0.18, "verdict": "marginal"},
                    {"family": "weibull", "aic": 230.66, "bic": 233.66, "ks_p_naive": 0.60, "ks_p_boot": 0.43, "verdict": "adopted"},
                    {"family": "lognormal", "aic": 230.85, "bic": 233.85, "ks_p_naive": 0.68, "ks_p_boot": 0.51, "verdict": "adequate"},
                ],
            },
            "regulatory_formal_post_2024": {
                "n": 22,
                "fits": [
                    {"family": "exponential", "aic": 179.45, "ks_p_boot": 0.224, "verdict": "preferred"},
                    {"family": "weibull", "aic": 180.50, "ks_p_boot": 0.043, "verdict": "rejected"},
                ],
            },
        },
        "hazard_rates": {
            "post_2024": {"rate": 0.042, "half_life_days": 16.4, "n": 57},
            "pre_2024": {"rate": 0.081, "half_life_days": 8.6, "n": 33},
        },
        "tevent_recovery": {
            "entering": 1151,
            "any_timestamp": 490,
            "ge_0.7": 442,
            "ge_0.8": 374,
            "ge_0.9": 161,
            "mean_confidence": 0.81,
            "median_confidence": 0.85,
        },
        "tevent_validation": {
            "regulatory_announcement": {"sampled": 12, "comparable": 12, "exact": 0.500, "within_24h": 0.583, "within_6h": 0.500, "sources": 0.0},
            "regulatory_formal": {"sampled": 18, "comparable": 14, "exact": 0.357, "within_24h": 0.500, "within_6h": 0.357, "sources": 0.0},
            "milgeo_corporate": {"sampled": 20, "comparable": 19, "exact": 0.789, "within_24h": 0.895, "within_6h": 0.789, "sources": 0.0},
            "overall": {"sampled": 50, "comparable": 45, "exact": 0.578, "within_24h": 0.689, "within_6h": 0.578, "sources": 0.0},
            "disagreements": {"minor": 9, "major": 10, "no_timestamp": 5},
        },
        "distribution_summary": [
            {"bucket": "regulatory_announcement", "period": "pre_2024", "n": 5, "mean": -0.31, "median": -0.23, "std": 0.60, "skew": -0.03, "p10": -1.00, "p90": 0.36},
            {"bucket": "regulatory_announcement", "period": "post_2024", "n": 14, "mean": -0.85, "median": -0.80, "std": 0.82, "skew": -0.08, "p10": -1.94, "p90": 0.11},
            {"bucket": "regulatory_formal", "period": "pre_2024", "n": 14, "mean": -0.22, "median": -0.16, "std": 0.44, "skew": -0.09, "p10": -0.81, "p90": 0.36},
            {"bucket": "regulatory_formal", "period": "post_2024", "n": 22, "mean": -0.48, "median": -0.21, "std": 1.78, "skew": -3.12, "p10": -1.06, "p90": 0.62},
            {"bucket": "milgeo_corporate", "period": "pre_2024", "n": 14, "mean": -0.57, "median": -0.88, "std": 0.55, "skew": 1.23, "p10": -1.00, "p90": 0.13},
            {"bucket": "milgeo_corporate", "period": "post_2024", "n": 19, "mean": -0.54, "median": -0.55, "std": 0.43, "skew": -0.10, "p10": -0.99, "p90": -0.01},
        ],
        "detection_thresholds": {
            "post_2024": {"n": 57, "0.90": [0.49, 0.07, 0.63], "0.95": [0.55, 0.31, 0.86], "0.99": [0.90, 0.52, 0.99]},
            "pre_2024": {"n": 33, "0.90": [0.36, 0.00, 0.61], "0.95": [0.48, 0.26, 0.82], "0.99": [0.71, 0.38, 0.82]},
        },
        "sample_summary": {
            "computed": {"n": 88, "median_raw": -0.42, "median_adj": -0.21, "p90_raw": 0.49, "ffic_in_scope": 1},
            "anchor_robust": {"n": 12, "median_raw": -0.19, "median_adj": -0.16, "p90_raw": 0.66, "ffic_in_scope": 0},
        },
        "hazard_adjusted": [
            {"bucket": "regulatory_announcement", "period": "pre_2024", "n": 5, "raw": [-0.23, -1.00, 0.47], "adj": [-0.26, -1.09, 0.86], "shift": -0.03},
            {"bucket": "regulatory_announcement", "period": "post_2024", "n": 14, "raw": [-0.80, -1.48, -0.26], "adj": [-0.84, -1.45, -0.24], "shift": -0.04},
            {"bucket": "regulatory_formal", "period": "pre_2024", "n": 14, "raw": [-0.16, -0.49, 0.01], "adj": [-0.13, -0.53, 0.06], "shift": 0.03},
            {"bucket": "regulatory_formal", "period": "post_2024", "n": 22, "raw": [-0.21, -0.40, 0.37], "adj": [-0.02, -0.31, 0.84], "shift": 0.19},
            {"bucket": "milgeo_corporate", "period": "pre_2024", "n": 14, "raw": [-0.88, -1.00, -0.28], "adj": [-0.79, -1.02, -0.27], "shift": 0.09},
            {"bucket": "milgeo_corporate", "period": "post_2024", "n": 19, "raw": [-0.55, -0.87, -0.23], "adj": [-0.34, -0.56, -0.01], "shift": 0.21},
        ],
        "fraction_positive_ci": {
            "regulatory_formal/post_2024": [0.23, 0.59],
            "regulatory_formal/pre_2024": [0.07, 0.50],
            "regulatory_announcement/post_2024": [0.00, 0.36],
            "milgeo_corporate/pre_2024": [0.00, 0.36],
        },
        "anchor_sensitivity": {"n": 88, "robust": 12, "share": 0.136, "spearman_24h": 0.30},
        "ffic_disposition_table8": [
            ["unclassifiable", 14, 43.8],
            ["deadline_no", 8, 25.0],
            ["edge_effect", 2, 6.25],
            ["low_confidence", 1, 3.1],
            ["compute_error", 1, 3.1],
            ["category_other", 1, 3.1],
            ["in_scope", 1, 3.1],
        ],
        "ffic_in_scope": {"market": "fficd-005", "ils_dl": 0.012},
        "selection_shares": {"insider_relevant": 11263, "other": 88656, "total": 99919, "shares": {"insider_relevant": 11.3, "other": 88.7}},
        "score_examples": {"midpoint_case": [0.60, 0.014, 1, -1.47], "prince_andrew": [0.89, 0.001, 1, -7.75], "iran_apr30": {"raw": 0.113, "adj": 0.156}},
    }


def main() -> None:
    (OUT / "ffic").mkdir(parents=True, exist_ok=True)
    (OUT / "population").mkdir(parents=True, exist_ok=True)
    write_csv(OUT / "ffic" / "markets.csv", ffic_markets())
    (OUT / "ffic" / "providers.json").write_text(json.dumps(ffic_providers(), indent=2, sort_keys=True) + "\n")
    write_jsonl(OUT / "ffic" / "prices.jsonl", ffic_prices())
    (OUT / "ffic" / "expected.json").write_text(json.dumps(FFIC_EXPECTED, indent=2) + "\n")
    (OUT / "iran_apr30.json").write_text(json.dumps(reference_fixture(), indent=2) + "\n")
    write_jsonl(OUT / "validation_pairs.jsonl", validation_pairs())
    rows, providers, prices, expected = population()
    write_csv(OUT / "population" / "markets.csv", rows)
    (OUT / "population" / "providers.json").write_text(json.dumps(providers, indent=2, sort_keys=True) + "\n")
    write_jsonl(OUT / "population" / "prices.jsonl", prices)
    (OUT / "population" / "expected.json").write_text(json.dumps(expected, indent=2) + "\n")
    (OUT / "paper_summary.json").write_text(json.dumps(paper_summary(), indent=2) + "\n")


if __name__ == "__main__":
    main()
