from __future__ import annotations

import csv
import math
from datetime import timedelta

import numpy as np
import pytest

from deadline_ils.decay import adjust_record, baseline_array
from deadline_ils.market_model import Outcome, ingest_markets, load_price_index, price_at
from deadline_ils.scoring import EVENT_ANCHOR_LAG, Exclusion, ScoringConfig, score_market
from deadline_ils.synth import Leak, SynthConfig, generate_cohort, generate_market, truth_recovery
from deadline_ils.tevent_recovery import read_checkpoint


def scored(cfg: SynthConfig, index: int):
    m = generate_market(cfg, index)
    return m, adjust_record(score_market(m.record, truth_recovery(m), m.series, ScoringConfig()), cfg.model)


def first_yes(cfg: SynthConfig, start: int = 0) -> int:
    i = start
    while generate_market(cfg, i).T_event is None:
        i += 1
    return i


def test_yes_share_matches_arrival_probability():
    cfg = SynthConfig()
    yes = np.mean([generate_market(cfg, i).record.outcome is Outcome.YES for i in range(1000)])
    expected = 1 - math.exp(-1.5)
    assert expected == pytest.approx(0.7769, abs=1e-4)
    assert abs(yes - expected) <= 3 * math.sqrt(expected * (1 - expected) / 1000)
    assert cfg.implied_p_open == pytest.approx(expected)


@pytest.mark.parametrize("family, params", [
    ("exponential", {"rate": 0.05}),
    ("weibull", {"k": 0.7, "scale": 18.8}),
    ("lognormal", {"mu": 2.5, "sigma": 1.0}),
])
def test_noise_free_market_tracks_baseline(family, params):
    cfg = SynthConfig(family=family, params=params)
    checked = 0
    for i in range(60):
        m, rec = scored(cfg, i)
        if m.T_event is None or not rec.in_scope:
            continue
        # the last hourly quote before the anchor sits on the baseline; only the grid offset remains
        anchor = (m.T_event - EVENT_ANCHOR_LAG - m.record.T_open).total_seconds() / 86400
        last = math.floor(anchor * 24 + 1e-9) / 24
        b = baseline_array(rec.p_open, np.array([last, anchor]), cfg.window_days, cfg.model)
        assert rec.ils_dl_adj == pytest.approx((b[0] - b[1]) / (1 - rec.p_open), abs=1e-9)
        assert abs(rec.ils_dl_adj) < 0.05
        checked += 1
    assert checked > 20


def test_leak_shifts_adjusted_score():
    cfg = SynthConfig(leak=Leak(2.0, 0.3))
    hits = 0
    for i in range(200):
        m, rec = scored(cfg, i)
        if not m.leaked or not rec.in_scope or m.tau_days < 3:
            continue
        assert rec.ils_dl_adj == pytest.approx(0.3 / (1 - rec.p_open), abs=0.03)
        hits += 1
    assert hits > 50


def test_no_event_before_deadline_is_deadline_no():
    cfg = SynthConfig(params={"rate": 0.01})
    i = 0
    while generate_market(cfg, i).T_event is not None:
        i += 1
    m, rec = scored(cfg, i)
    assert m.tau_days > cfg.window_days
    assert m.record.outcome is Outcome.NO
    assert rec.exclusion_reason is Exclusion.DEADLINE_NO


def test_event_quote_is_one_and_anchor_precedes_it():
    cfg = SynthConfig(noise_sd=0.02)
    m = generate_market(cfg, first_yes(cfg))
    assert price_at(m.series, m.T_event) == 1.0
    assert price_at(m.series, m.T_event - EVENT_ANCHOR_LAG) < 1.0


def test_cohort_files_are_byte_identical(tmp_path):
    cfg = SynthConfig(noise_sd=0.01, leak=Leak(1.0, 0.2), seed=3)
    a = generate_cohort(cfg, 25, tmp_path / "a")
    b = generate_cohort(cfg, 25, tmp_path / "b")
    for key in a:
        assert a[key].read_bytes() == b[key].read_bytes()
    markets = ingest_markets(a["markets"]).records
    assert len(markets) == 25 and len(load_price_index(a["prices"])) == 25
    recs = read_checkpoint(a["recoveries"])
    with a["ground_truth"].open() as fh:
        truth = list(csv.DictReader(fh))
    for row in truth:
        r = recs[row["market_id"]]
        assert (r.T_event is not None) == (row["outcome"] == "YES")


def test_seed_changes_cohort(tmp_path):
    a = generate_cohort(SynthConfig(seed=1), 5, tmp_path / "a")
    b = generate_cohort(SynthConfig(seed=2), 5, tmp_path / "b")
    assert a["prices"].read_bytes() != b["prices"].read_bytes()


def test_config_round_trip_and_validation():
    cfg = SynthConfig(family="weibull", params={"k": 0.7, "scale": 18.0}, leak=Leak(1.5, 0.25), noise_sd=0.01,
                      observation_interval=timedelta(minutes=30), seed=9)
    again = SynthConfig.from_mapping(cfg.to_mapping())
    assert again == cfg
    for bad in ({"family": "gamma"}, {"window_days": 0}, {"noise_sd": -1}, {"p_open": 1.0}):
        with pytest.raises(ValueError):
            SynthConfig(**bad)
    with pytest.raises(ValueError):
        Leak(1.0, 1.5)
    with pytest.raises(ValueError):
        generate_cohort(SynthConfig(), 0, "unused")
