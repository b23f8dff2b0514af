from __future__ import annotations

import math
from dataclasses import replace
from datetime import datetime, timedelta, timezone

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from deadline_ils.bundled import load_reference
from deadline_ils.decay import (
    BaselineContext,
    DegenerateWindow,
    adjust_record,
    adjusted_ils,
    baseline_array,
    baseline_price,
    residual_survival,
    survival,
)
from deadline_ils.hazard import HazardFit
from deadline_ils.scoring import ScoringConfig, TrivialMove, score_market
from deadline_ils.tevent_recovery import TIERS, recover_cascade

T0 = datetime(2025, 1, 1, tzinfo=timezone.utc)
EXP = HazardFit("exponential", {"rate": 0.1}, 1, 0.0)

models = st.one_of(
    st.builds(lambda r: HazardFit("exponential", {"rate": r}, 1, 0.0), st.floats(0.01, 2.0)),
    st.builds(lambda k, s: HazardFit("weibull", {"k": k, "scale": s}, 1, 0.0), st.floats(0.3, 4.0), st.floats(1.0, 80.0)),
    st.builds(lambda m, s: HazardFit("lognormal", {"mu": m, "sigma": s}, 1, 0.0), st.floats(-1.0, 3.5), st.floats(0.2, 3.0)),
)


def ctx(t_days: float, p_open: float = 0.6, window: float = 30.0, model: HazardFit = EXP) -> BaselineContext:
    return BaselineContext(p_open, T0, T0 + timedelta(days=window), T0 + timedelta(days=t_days), model)


def test_survival_values():
    assert survival(0.0, EXP) == 1.0
    assert survival(20.0, EXP) == pytest.approx(float(mpmath.exp(-2)), rel=1e-14)
    weib = HazardFit("weibull", {"k": 1.0, "scale": 10.0}, 1, 0.0)
    assert survival(20.0, weib) == pytest.approx(survival(20.0, EXP), rel=1e-14)
    logn = HazardFit("lognormal", {"mu": 2.0, "sigma": 0.5}, 1, 0.0)
    oracle = 1 - mpmath.ncdf((mpmath.log(10) - 2) / mpmath.mpf(0.5))
    assert survival(10.0, logn) == pytest.approx(float(oracle), rel=1e-12)
    with pytest.raises(ValueError):
        survival(-1.0, EXP)


def test_baseline_closed_form():
    oracle = 0.6 * (mpmath.exp(-1) - mpmath.exp(-3)) / (1 - mpmath.exp(-3))
    assert baseline_price(ctx(10.0)) == pytest.approx(float(oracle), rel=1e-13)
    assert round(baseline_price(ctx(10.0)), 4) == 0.2009


def test_baseline_limits():
    assert baseline_price(ctx(0.0)) == pytest.approx(0.6, abs=1e-15)
    assert baseline_price(ctx(30.0)) == 0.0


@given(models, st.floats(0.05, 0.95), st.floats(1.0, 60.0))
def test_baseline_is_bounded_and_non_increasing(model, p_open, window):
    s_d = survival(window, model)
    if s_d > 1 - 1e-9:
        with pytest.raises(DegenerateWindow):
            baseline_array(p_open, np.array([0.0]), window, model)
        return
    path = baseline_array(p_open, np.linspace(0, window, 200), window, model)
    assert path[0] == pytest.approx(p_open, abs=1e-12)
    assert abs(path[-1]) <= 1e-12
    assert np.all(np.diff(path) <= 1e-15)
    assert np.all((path >= -1e-12) & (path <= p_open + 1e-12))


@given(models, st.floats(0.0, 1.0))
def test_scalar_and_vector_baselines_agree(model, frac):
    if survival(30.0, model) > 1 - 1e-9:
        return
    c = ctx(30.0 * frac, 0.5, 30.0, model)
    offset = (c.t - c.T_open).total_seconds() / 86400.0  # datetimes round to microseconds
    vec = baseline_array(0.5, np.array([offset]), 30.0, model)[0]
    assert baseline_price(c) == pytest.approx(vec, rel=1e-9, abs=1e-12)


def test_degenerate_window():
    tiny = HazardFit("exponential", {"rate": 1e-16}, 1, 0.0)
    with pytest.raises(DegenerateWindow):
        baseline_price(ctx(1.0, model=tiny))


def test_context_validation():
    with pytest.raises(ValueError):
        ctx(31.0)
    with pytest.raises(ValueError):
        ctx(1.0, p_open=1.2)
    with pytest.raises(ValueError):
        ctx(1.0, model=HazardFit("exponential", {}, 1, 0.0))


def test_residual_survival():
    assert residual_survival(ctx(10.0)) == pytest.approx(math.exp(-2.0))
    assert residual_survival(ctx(30.0)) == pytest.approx(1.0)


def test_adjusted_identities():
    assert adjusted_ils(0.3, 0.3, 0.6, 1.0) == 0.0
    raw = (0.6 - 0.6) / 0.4
    assert adjusted_ils(0.6, 0.0, 0.6, 1.0) == pytest.approx(raw + 0.6 / 0.4)
    with pytest.raises(TrivialMove):
        adjusted_ils(0.97, 0.5, 0.97, 1.0)


def test_reference_market_adjustment():
    ref = load_reference()
    rec = recover_cascade(ref.record, *[ref.file_providers()[t] for t in TIERS])
    scored = score_market(ref.record, rec, ref.series, ScoringConfig())
    adj = adjust_record(scored, ref.model)
    assert adj.ils_dl == pytest.approx(0.113, abs=5e-4)
    assert adj.ils_dl_adj == pytest.approx(ref.expected["oracle_ils_dl_adj"], abs=1e-9)
    shift = adj.ils_dl_adj - adj.ils_dl
    assert adj.adj_ci_low == pytest.approx(adj.ci_low + shift)
    assert adj.adj_ci_high == pytest.approx(adj.ci_high + shift)
    assert 0 < adj.expected_decay_price < adj.p_open


def test_adjust_leaves_other_records_alone():
    ref = load_reference()
    rec = recover_cascade(ref.record, *[ref.file_providers()[t] for t in TIERS])
    scored = score_market(ref.record, rec, ref.series, ScoringConfig())
    event_type = replace(scored, resolution_type="event_resolved")
    assert adjust_record(event_type, ref.model) is event_type
