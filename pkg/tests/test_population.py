from __future__ import annotations

from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import run_fixture
from deadline_ils.bundled import load_summary
from deadline_ils.population import (
    anchor_sensitivity_summary,
    attrition_from_dispositions,
    detection_thresholds,
    ffic_disposition,
    fraction_positive,
    median_bootstrap_ci,
    quantile_nearest_rank,
    run_filter_chain,
    selection_shares,
    spearman,
    summarize_cell,
    tails,
)

floats = st.floats(-10, 10, allow_nan=False)


def brute_nearest_rank(values, q: Fraction) -> float:
    ordered = sorted(values)
    return next(v for v in ordered if Fraction(sum(x <= v for x in ordered), len(ordered)) >= q)


@given(st.lists(floats, min_size=1, max_size=80), st.integers(1, 100))
def test_nearest_rank_matches_sort_oracle(values, pct):
    q = Fraction(pct, 100)
    assert quantile_nearest_rank(values, float(q)) == brute_nearest_rank(values, q)


def test_nearest_rank_errors():
    with pytest.raises(ValueError):
        quantile_nearest_rank([], 0.5)
    with pytest.raises(ValueError):
        quantile_nearest_rank([1.0], 0.0)


def test_summarize_symmetric_cell():
    s = summarize_cell([-1.0, 0.0, 1.0])
    assert (s.mean, s.median, s.skewness) == (0.0, 0.0, pytest.approx(0.0))


def test_summarize_constant_and_small_cells():
    s = summarize_cell([0.2] * 5)
    assert s.std == 0.0 and s.skewness is None
    assert summarize_cell([1.0, 2.0]).skewness is None
    assert summarize_cell([1.0]).std is None
    with pytest.raises(ValueError):
        summarize_cell([])


def test_thresholds_on_grid():
    th = detection_thresholds(np.arange(1, 101) / 100)
    assert [t.value for t in th] == [0.90, 0.95, 0.99]
    assert not any(t.low_n for t in th)
    for t in th:
        assert t.ci_low <= t.value <= t.ci_high


def test_constant_thresholds_and_low_n():
    th = detection_thresholds([0.3] * 6)
    assert all(t.value == t.ci_low == t.ci_high == 0.3 for t in th)
    assert all(t.low_n for t in th)


def test_bootstrap_determinism():
    x = np.random.default_rng(2).normal(size=57)
    assert detection_thresholds(x) == detection_thresholds(x)
    assert median_bootstrap_ci(x) == median_bootstrap_ci(x)
    assert median_bootstrap_ci(x, seed=1) != median_bootstrap_ci(x)


def test_median_ci():
    lo, hi = median_bootstrap_ci([-1.0, 0.0, 1.0])
    assert lo <= 0.0 <= hi
    assert median_bootstrap_ci([1.0]) is None


def test_fraction_positive():
    assert fraction_positive([-1.0, -2.0])[0] == 0.0
    assert fraction_positive([-1.0, 1.0])[0] == 0.5
    point, ci = fraction_positive([0.5])
    assert point == 1.0 and ci is None


def test_spearman():
    a = [1.0, 3.0, 2.0, 5.0]
    assert spearman(a, a) == pytest.approx(1.0)
    assert spearman(a, [-v for v in a]) == pytest.approx(-1.0)
    assert spearman([1.0, 2.0], [1.0, 2.0]) is None
    assert spearman([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]) is None


def test_selection_shares():
    t = selection_shares({"other": 88_656, "insider_relevant": 11_263})
    assert round(100 * t.shares["insider_relevant"], 1) == 11.3
    assert round(100 * t.shares["other"], 1) == 88.7
    assert t.ratio == pytest.approx(88_656 / 11_263)
    assert selection_shares({"a": 5, "b": 5}).shares == {"a": 0.5, "b": 0.5}
    with pytest.raises(ZeroDivisionError):
        selection_shares({"a": 0})


def test_published_selection_shares_reproduce():
    pub = load_summary()["selection_shares"]
    t = selection_shares({"insider_relevant": pub["insider_relevant"], "other": pub["other"]})
    assert t.total == pub["total"]
    assert {k: round(100 * v, 1) for k, v in t.shares.items()} == pub["shares"]


def test_empty_chain():
    table, records = run_filter_chain([], {}, {})
    assert records == [] and all(n == 0 for n in table.counts)
    assert ffic_disposition([], {}) == []


def test_duplicate_ids_rejected():
    run = run_fixture("population", classify=False)
    with pytest.raises(ValueError):
        run_filter_chain(run.markets[:2] * 2, run.recoveries, run.prices)


def test_missing_inputs_degrade_to_dispositions():
    run = run_fixture("population", classify=False)
    table, records = run_filter_chain(run.markets, {}, {})
    assert table.counts[-1] == 0
    assert {r.exclusion_reason.value for r in records} <= {
        "category_other", "low_volume", "unclassifiable", "deadline_no", "low_confidence"
    }


def test_attrition_is_non_increasing_for_any_subset():
    run = run_fixture("population", classify=False)
    rng = np.random.default_rng(0)
    for _ in range(20):
        subset = [r for r in run.records if rng.random() < 0.6]
        counts = attrition_from_dispositions(subset).counts
        assert all(b <= a for a, b in zip(counts, counts[1:]))


def test_ffic_breakdown(ffic_run):
    rows = ffic_disposition(ffic_run.markets, ffic_run.by_id)
    assert sum(r.count for r in rows) == 32
    assert rows[-1].disposition == "in_scope" and rows[-1].market_ids == ("fficd-005-a",)
    assert rows[0].disposition == "unclassifiable"
    assert ffic_run.by_id["fficd-005-a"].ils_dl == pytest.approx(0.012, abs=5e-4)
    assert sum(r.share for r in rows) == pytest.approx(1.0)


def test_anchor_summary_and_tails():
    run = run_fixture("population", classify=False)
    summary = anchor_sensitivity_summary(run.records)
    scored = [r for r in run.records if r.in_scope]
    assert summary.n == len(scored)
    assert summary.robust_count == sum(r.anchor_robust for r in scored)
    top, bottom = tails(run.records, k=3)
    assert [r.ils_dl for r in top] == sorted((r.ils_dl for r in scored), reverse=True)[:3]
    assert [r.ils_dl for r in bottom] == sorted(r.ils_dl for r in scored)[:3]


def test_robust_share_at_published_scale():
    run = run_fixture("population", classify=False)
    template = next(r for r in run.records if r.in_scope)
    records = [replace(template, market_id=f"x{i}", anchor_robust=i < 12) for i in range(88)]
    summary = anchor_sensitivity_summary(records)
    assert (summary.n, summary.robust_count) == (88, 12)
    assert round(summary.robust_share, 3) == load_summary()["anchor_sensitivity"]["share"]
