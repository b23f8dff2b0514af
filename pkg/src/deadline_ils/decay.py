"""Rational-decay baseline for deadline contracts and the decay-adjusted score.

A deadline contract opened at ``T_open`` with no event yet observed should
trade at the conditional probability that the event still arrives before
``D``. With arrival-time survival ``S`` measured from the open,

    baseline(t) = p_open * (S(t - T_open) - S(D - T_open)) / (1 - S(D - T_open)),

which equals ``p_open`` at the open and zero at the deadline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from datetime import datetime

import numpy as np
from scipy import special

from deadline_ils.hazard import HazardFit
from deadline_ils.market_model import EVENT_ANCHOR_LAG
from deadline_ils.scoring import EPSILON, ScoreRecord, TrivialMove

DEGENERATE_TOLERANCE = 1e-12
_DAY = 86400.0


class DegenerateWindow(ValueError):
    """The fitted model puts no arrival mass inside the deadline window."""


def _days(a: datetime, b: datetime) -> float:
    return (b - a).total_seconds() / _DAY


def survival(delta_days: float, model: HazardFit) -> float:
    """Probability the event has not arrived ``delta_days`` after the open."""
    if delta_days < 0:
        raise ValueError("delta_days must be nonnegative")
    if delta_days == 0:
        return 1.0
    p = model.params
    if model.family == "exponential":
        return math.exp(-p["rate"] * delta_days)
    if model.family == "weibull":
        return math.exp(-((delta_days / p["scale"]) ** p["k"]))
    return float(special.ndtr(-(math.log(delta_days) - p["mu"]) / p["sigma"]))


def survival_array(delta_days: np.ndarray, model: HazardFit) -> np.ndarray:
    """Vectorized ``survival`` for nonnegative day offsets."""
    d = np.asarray(delta_days, dtype=float)
    if np.any(d < 0):
        raise ValueError("delta_days must be nonnegative")
    p = model.params
    if model.family == "exponential":
        return np.exp(-p["rate"] * d)
    if model.family == "weibull":
        return np.exp(-((d / p["scale"]) ** p["k"]))
    with np.errstate(divide="ignore"):
        z = (np.log(d) - p["mu"]) / p["sigma"]
    return np.where(d == 0, 1.0, special.ndtr(-z))


def baseline_array(
    p_open: float, delta_days: np.ndarray, window_days: float, model: HazardFit
) -> np.ndarray:
    """Baseline at many offsets from the open for one deadline window."""
    s_d = float(survival_array(np.array([window_days]), model)[0])
    if s_d > 1.0 - DEGENERATE_TOLERANCE:
        raise DegenerateWindow(f"S(D - T_open) = {s_d!r}: no arrival mass before the deadline")
    return p_open * (survival_array(delta_days, model) - s_d) / (1.0 - s_d)


@dataclass(frozen=True)
class BaselineContext:
    p_open: float
    T_open: datetime
    D: datetime
    t: datetime
    model: HazardFit

    def __post_init__(self) -> None:
        if not (self.T_open <= self.t <= self.D):
            raise ValueError("baseline requires T_open <= t <= D")
        if not 0.0 <= self.p_open <= 1.0:
            raise ValueError("p_open must lie in [0, 1]")
        if not self.model.params:
            raise ValueError("baseline needs a fitted model with parameters")


def residual_survival(ctx: BaselineContext) -> float:
    """Two-argument S(t, D): chance of no arrival in ``(t, D]`` given none by ``t``."""
    s_t = survival(_days(ctx.T_open, ctx.t), ctx.model)
    if s_t == 0:
        return 1.0
    return survival(_days(ctx.T_open, ctx.D), ctx.model) / s_t


def baseline_price(ctx: BaselineContext) -> float:
    s_t = survival(_days(ctx.T_open, ctx.t), ctx.model)
    s_d = survival(_days(ctx.T_open, ctx.D), ctx.model)
    if s_d > 1.0 - DEGENERATE_TOLERANCE:
        raise DegenerateWindow(f"S(D - T_open) = {s_d!r}: no arrival mass before the deadline")
    return ctx.p_open * (s_t - s_d) / (1.0 - s_d)


def adjusted_ils(
    p_event_minus: float, baseline: float, p_open: float, p_resolve: float, epsilon: float = EPSILON
) -> float:
    total = p_resolve - p_open
    if abs(total) < epsilon:
        raise TrivialMove(f"|p_resolve - p_open| = {abs(total):.4g} < {epsilon}")
    return (p_event_minus - baseline) / total


def adjust_record(record: ScoreRecord, model: HazardFit, epsilon: float = EPSILON) -> ScoreRecord:
    """Attach baseline, adjusted score and shifted CI to an in-scope deadline record.

    The baseline is a constant for a given market, so the adjusted CI is the
    raw trade-bootstrap interval shifted by ``(p_open - baseline) / total``.
    Event-resolved records carry no deadline and are returned unchanged.
    """
    if not record.in_scope or record.resolution_type != "deadline_resolved" or record.D is None:
        return record
    anchor = min(max(record.T_event - EVENT_ANCHOR_LAG, record.T_open), record.D)
    ctx = BaselineContext(record.p_open, record.T_open, record.D, anchor, model)
    base = baseline_price(ctx)
    adj = adjusted_ils(record.p_event, base, record.p_open, record.p_resolve, epsilon)
    shift = adj - record.ils_dl
    lo = record.ci_low + shift if record.ci_low is not None else None
    hi = record.ci_high + shift if record.ci_high is not None else None
    return replace(record, ils_dl_adj=adj, adj_ci_low=lo, adj_ci_high=hi, expected_decay_price=base)
