from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from deadline_ils.hazard import (
    FitFailure,
    HazardFit,
    Verdict,
    exponential_loglik,
    fit_exponential,
    fit_group,
    fit_lognormal,
    fit_weibull,
    fit_from_mapping,
    fit_to_mapping,
    full_fit,
    gof_verdict,
    group_from_mapping,
    group_to_mapping,
    half_life,
    ks_naive,
    ks_parametric_bootstrap,
    select_model,
    summary_fit,
    weibull_loglik,
    weibull_mean,
)

positive_samples = st.lists(st.floats(0.01, 500.0), min_size=3, max_size=60).filter(lambda xs: max(xs) > min(xs) * 1.001)


def test_exponential_closed_form():
    assert fit_exponential([1, 2, 3]).params["rate"] == pytest.approx(0.5)
    assert fit_exponential([4.0] * 7).params["rate"] == pytest.approx(0.25)


def test_half_life():
    assert half_life(0.042) == pytest.approx(16.5, abs=0.05)
    assert half_life(0.081) == pytest.approx(8.6, abs=0.05)


@pytest.mark.parametrize("bad", [[1.0, 0.0, 2.0], [1.0, -3.0], [1.0, float("nan")], [2.0]])
def test_nonpositive_or_short_samples_rejected(bad):
    with pytest.raises(ValueError):
        fit_exponential(bad)


def test_constant_sample_has_no_weibull_shape():
    with pytest.raises(FitFailure):
        fit_weibull([3.0] * 10)


def test_weibull_nests_exponential():
    x = np.random.default_rng(1).exponential(20.0, 5000)
    w, e = fit_weibull(x), fit_exponential(x)
    assert w.params["k"] == pytest.approx(1.0, abs=0.05)
    assert 0.0 <= w.loglik - e.loglik < 2.0
    rate = e.params["rate"]
    assert weibull_loglik(x, 1.0, 1 / rate) == pytest.approx(exponential_loglik(x, rate), abs=1e-6)


@settings(max_examples=60, deadline=None)
@given(positive_samples)
def test_weibull_mle_beats_scipy(xs):
    x = np.asarray(xs)
    ours = fit_weibull(x)
    k, _, scale = stats.weibull_min.fit(x, floc=0)
    assert ours.loglik >= weibull_loglik(x, k, scale) - 1e-6 * max(1.0, abs(ours.loglik))


@settings(max_examples=60, deadline=None)
@given(positive_samples, st.floats(1e-3, 1e3))
def test_weibull_shape_is_scale_free(xs, c):
    a, b = fit_weibull(xs), fit_weibull([v * c for v in xs])
    assert b.params["k"] == pytest.approx(a.params["k"], rel=1e-6)
    assert b.params["scale"] == pytest.approx(a.params["scale"] * c, rel=1e-6)


def test_weibull_survives_huge_values():
    fit = fit_weibull(np.array([1.0, 2.0, 5.0, 9.0]) * 1e200)
    assert math.isfinite(fit.params["k"]) and math.isfinite(fit.loglik)


def test_lognormal_closed_form():
    x = np.exp(np.array([-1.0, 0.0, 1.0, 2.0]))
    fit = fit_lognormal(x)
    assert fit.params["mu"] == pytest.approx(0.5, abs=1e-15)
    assert fit.params["sigma"] == pytest.approx(np.log(x).std(ddof=0))
    assert fit.loglik == pytest.approx(stats.lognorm(fit.params["sigma"], scale=math.exp(0.5)).logpdf(x).sum())


def test_information_criteria():
    fit = fit_weibull([1.0, 2.0, 4.0, 7.0, 11.0])
    assert fit.aic == pytest.approx(4 - 2 * fit.loglik)
    assert fit.bic == pytest.approx(2 * math.log(5) - 2 * fit.loglik)
    assert summary_fit("exponential", 57, 476.59).aic == pytest.approx(476.59)


def test_ks_self_consistency():
    x = np.random.default_rng(4).exponential(10.0, 20_000)
    stat, p = ks_naive(x, fit_exponential(x))
    assert stat < 0.015 and p > 0.01


@given(st.floats(0.01, 100), st.floats(0.01, 100))
def test_two_point_sample_is_far_from_any_continuous_cdf(a, b):
    x = [a, b] if a != b else [a, a * 2]
    fit = HazardFit("exponential", {"rate": 0.3}, 2, 0.0)
    assert ks_naive(x, fit)[0] >= 0.25


def test_bootstrap_p_is_deterministic_and_order_free():
    x = np.random.default_rng(5).weibull(1.5, 40) * 10
    p1, _ = ks_parametric_bootstrap(x, "weibull", 199, seed=11)
    p2, _ = ks_parametric_bootstrap(x[::-1], "weibull", 199, seed=11)
    assert p1 == p2
    assert 1 / 200 <= p1 <= 1.0


def test_bootstrap_rejects_small_b():
    with pytest.raises(ValueError):
        ks_parametric_bootstrap([1.0, 2.0, 3.0], "exponential", B=10)


def test_bootstrap_corrects_naive_p():
    x = np.random.default_rng(6).exponential(10.0, 50)
    fit = full_fit(x, "exponential", B=999, seed=1)
    assert fit.ks_p_boot < fit.ks_p_naive


def _published(fits, n):
    return [summary_fit(f, n, aic, naive, boot) for f, aic, naive, boot in fits]


def test_selection_adopts_weibull_on_large_gain():
    sel = select_model(
        _published([("exponential", 476.59, 0.0002, 0.005), ("weibull", 454.66, 0.78, 0.6), ("lognormal", 454.70, 0.79, 0.6)], 57)
    )
    assert sel.adopted == "weibull"
    assert [f.verdict for f in sel.fits] == [Verdict.REJECTED, Verdict.ADOPTED, Verdict.ADEQUATE]


def test_selection_retains_exponential_below_threshold():
    sel = select_model(_published([("exponential", 233.99, 0.073, 0.18), ("weibull", 230.66, 0.6, 0.43)], 33))
    assert sel.adopted == "exponential"
    assert gof_verdict(sel.fit_for("weibull")) is Verdict.ADEQUATE


def test_selection_prefers_exponential_over_rejected_weibull():
    sel = select_model(_published([("exponential", 179.45, None, 0.224), ("weibull", 180.50, None, 0.043)], 22))
    assert sel.adopted == "exponential"
    assert sel.fit_for("weibull").verdict is Verdict.REJECTED


def test_selection_falls_back_when_simplest_rejected():
    sel = select_model(_published([("exponential", 200.0, None, 0.01), ("weibull", 198.0, None, 0.4)], 30))
    assert sel.adopted == "weibull"


def test_no_adequate_model():
    sel = select_model(_published([("exponential", 200.0, None, 0.01), ("weibull", 150.0, None, 0.02)], 30))
    assert sel.adopted is None and sel.adopted_fit is None
    assert "no adequate model" in sel.note


def test_selection_argument_errors():
    with pytest.raises(ValueError):
        select_model([summary_fit("exponential", 10, 1.0)])
    with pytest.raises(ValueError):
        select_model([summary_fit("exponential", 10, 1.0), summary_fit("weibull", 11, 1.0)])


def test_fit_group_and_mappings():
    x = np.random.default_rng(8).weibull(0.8, 30) * 15
    group = fit_group(x, "post_2024", "post_2024", B=199, seed=3)
    assert group.selection is not None and group.n == 30
    assert group_from_mapping(group_to_mapping(group)) == group
    for f in group.selection.fits:
        assert fit_from_mapping(fit_to_mapping(f)) == f
    assert fit_group([1.0, 2.0], "tiny").skipped


def test_weibull_mean():
    assert weibull_mean(1.0, 10.0) == pytest.approx(10.0)
    assert weibull_mean(2.0, 1.0) == pytest.approx(math.sqrt(math.pi) / 2)
