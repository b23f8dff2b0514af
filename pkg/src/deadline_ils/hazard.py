"""Waiting-time models for event arrival: MLE fits, KS diagnostics and model selection.

Lead times are real-valued days. Weibull uses the standard scale
parameterization, ``S(t) = exp(-(t/scale)^k)``.
"""

from __future__ import annotations

import enum
import hashlib
import math
from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize, special, stats

FAMILIES = ("exponential", "weibull", "lognormal")
N_PARAMS = {"exponential": 1, "weibull": 2, "lognormal": 2}
AIC_THRESHOLD = 4.0
ALPHA_REJECT = 0.05
ALPHA_MARGINAL = 0.10
K_XTOL = 1e-8
REFIT_FAILURE_LIMIT = 0.05


class Verdict(str, enum.Enum):
    ADOPTED = "adopted"
    ADEQUATE = "adequate"
    MARGINAL = "marginal"
    REJECTED = "rejected"


class FitFailure(RuntimeError):
    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class HazardFit:
    family: str
    params: dict[str, float]
    n: int
    loglik: float
    ks_stat: float | None = None
    ks_p_naive: float | None = None
    ks_p_boot: float | None = None
    verdict: Verdict | None = None
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        for name, value in self.params.items():
            if name != "mu" and not value > 0:
                raise ValueError(f"{self.family} parameter {name} must be positive, got {value}")
        for p in (self.ks_p_naive, self.ks_p_boot):
            if p is not None and not 0.0 <= p <= 1.0:
                raise ValueError("KS p-values must lie in [0, 1]")

    @property
    def n_params(self) -> int:
        return N_PARAMS[self.family]

    @property
    def aic(self) -> float:
        return 2 * self.n_params - 2 * self.loglik

    @property
    def bic(self) -> float:
        return self.n_params * math.log(self.n) - 2 * self.loglik

    def distribution(self):
        """Frozen scipy distribution for the fitted parameters."""
        p = self.params
        if self.family == "exponential":
            return stats.expon(scale=1.0 / p["rate"])
        if self.family == "weibull":
            return stats.weibull_min(p["k"], scale=p["scale"])
        return stats.lognorm(p["sigma"], scale=math.exp(p["mu"]))

    def cdf(self, x):
        return self.distribution().cdf(x)


def summary_fit(
    family: str,
    n: int,
    aic: float,
    ks_p_naive: float | None = None,
    ks_p_boot: float | None = None,
) -> HazardFit:
    """A parameter-free fit reconstructed from a published AIC (loglik = p - AIC/2)."""
    return HazardFit(family, {}, n, N_PARAMS[family] - aic / 2.0, None, ks_p_naive, ks_p_boot)


def _as_taus(taus: Sequence[float], min_n: int) -> np.ndarray:
    x = np.asarray(taus, dtype=float)
    if x.ndim != 1 or x.size < min_n:
        raise ValueError(f"need at least {min_n} lead times")
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise ValueError("lead times must be finite and strictly positive")
    return x


def exponential_loglik(x: np.ndarray, rate: float) -> float:
    return float(x.size * math.log(rate) - rate * x.sum())


def weibull_loglik(x: np.ndarray, k: float, scale: float) -> float:
    z = x / scale
    return float(x.size * (math.log(k) - k * math.log(scale)) + (k - 1) * np.log(x).sum() - np.sum(z**k))


def lognormal_loglik(x: np.ndarray, mu: float, sigma: float) -> float:
    lx = np.log(x)
    return float(
        -lx.sum() - x.size * (math.log(sigma) + 0.5 * math.log(2 * math.pi)) - np.sum((lx - mu) ** 2) / (2 * sigma**2)
    )


def fit_exponential(taus: Sequence[float]) -> HazardFit:
    x = _as_taus(taus, 2)
    rate = x.size / x.sum()
    return HazardFit("exponential", {"rate": float(rate)}, x.size, exponential_loglik(x, rate))


def _weibull_profile_k(x: np.ndarray) -> float:
    """Root of the profile score in k; terms are rescaled by max(x) so x**k cannot overflow."""
    u = np.log(x / x.max())
    mean_u = u.mean()
    if np.ptp(u) == 0:
        raise FitFailure("Weibull shape diverges on a constant sample", {"n": x.size})

    def score(k: float) -> float:
        w = np.exp(k * u)
        return 1.0 / k + mean_u - float(np.dot(w, u) / w.sum())

    lo, hi = 0.5, 2.0
    for _ in range(200):
        if score(lo) > 0:
            break
        lo /= 2.0
    else:
        raise FitFailure("could not bracket Weibull shape from below", {"lo": lo})
    for _ in range(200):
        if score(hi) < 0:
            break
        hi *= 2.0
    else:
        raise FitFailure("could not bracket Weibull shape from above", {"hi": hi})
    k, res = optimize.brentq(score, lo, hi, xtol=K_XTOL, full_output=True, maxiter=500)
    if not res.converged:
        raise FitFailure("Weibull shape search did not converge", {"iterations": res.iterations, "flag": res.flag})
    return float(k)


def fit_weibull(taus: Sequence[float]) -> HazardFit:
    """Profile MLE: solve for k, then scale = mean(x**k)**(1/k)."""
    x = _as_taus(taus, 3)
    k = _weibull_profile_k(x)
    m = x.max()
    scale = float(m * np.mean((x / m) ** k) ** (1.0 / k))
    return HazardFit("weibull", {"k": k, "scale": scale}, x.size, weibull_loglik(x, k, scale))


def fit_lognormal(taus: Sequence[float]) -> HazardFit:
    """Closed form: mean and (maximum-likelihood, n-denominator) SD of log lead times."""
    x = _as_taus(taus, 3)
    lx = np.log(x)
    mu, sigma = float(lx.mean()), float(lx.std())
    if sigma == 0:
        raise FitFailure("lognormal sigma is zero on a constant sample", {"n": x.size})
    return HazardFit("lognormal", {"mu": mu, "sigma": sigma}, x.size, lognormal_loglik(x, mu, sigma))


FITTERS = {"exponential": fit_exponential, "weibull": fit_weibull, "lognormal": fit_lognormal}


def fit_family(taus: Sequence[float], family: str) -> HazardFit:
    return FITTERS[family](taus)


def ks_statistic_sorted(xs: np.ndarray, cdf_values: np.ndarray) -> np.ndarray:
    """Two-sided KS distance for row-sorted samples (last axis), given the fitted CDF at each point."""
    n = xs.shape[-1]
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - cdf_values, axis=-1)
    d_minus = np.max(cdf_values - (i - 1) / n, axis=-1)
    return np.maximum(d_plus, d_minus)


def ks_naive(taus: Sequence[float], fit: HazardFit) -> tuple[float, float]:
    """One-sample KS against the fitted CDF with the asymptotic p-value."""
    x = _as_taus(taus, 1)
    res = stats.kstest(x, fit.cdf, method="asymp")
    return float(res.statistic), float(res.pvalue)


def _family_stream(seed: int, family: str) -> np.random.Generator:
    tag = int.from_bytes(hashlib.sha256(family.encode()).digest()[:8], "little")
    return np.random.default_rng(np.random.SeedSequence([seed, tag]))


def _bootstrap_stats(fit: HazardFit, B: int, n: int, rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """KS statistics of B refit synthetic samples; returns (stats, refit failures)."""
    p = fit.params
    if fit.family == "exponential":
        sims = np.sort(rng.exponential(1.0 / p["rate"], size=(B, n)), axis=1)
        rate = n / sims.sum(axis=1, keepdims=True)
        return ks_statistic_sorted(sims, -np.expm1(-rate * sims)), 0
    if fit.family == "lognormal":
        sims = np.sort(rng.lognormal(p["mu"], p["sigma"], size=(B, n)), axis=1)
        lx = np.log(sims)
        mu = lx.mean(axis=1, keepdims=True)
        sigma = lx.std(axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            cdf = special.ndtr((lx - mu) / sigma)
        ok = sigma[:, 0] > 0
        return ks_statistic_sorted(sims[ok], cdf[ok]), int((~ok).sum())
    sims = np.sort(p["scale"] * rng.weibull(p["k"], size=(B, n)), axis=1)
    out, failures = [], 0
    for row in sims:
        try:
            k = _weibull_profile_k(row)
        except FitFailure:
            failures += 1
            continue
        m = row.max()
        scale = m * float(np.mean((row / m) ** k)) ** (1.0 / k)
        out.append(ks_statistic_sorted(row, -np.expm1(-((row / scale) ** k))))
    return np.asarray(out, dtype=float), failures


def ks_parametric_bootstrap(
    taus: Sequence[float],
    family: str,
    B: int = 999,
    seed: int = 20260430,
    fit: HazardFit | None = None,
) -> tuple[float, tuple[str, ...]]:
    """Refit-and-restat p-value, ``(1 + #{boot >= obs}) / (B + 1)``.

    Failed refits are dropped from both counts; a warning is attached when
    they exceed five percent of replications.
    """
    if B < 99:
        raise ValueError("B must be at least 99")
    x = _as_taus(taus, 3 if family != "exponential" else 2)
    fit = fit or fit_family(x, family)
    xs = np.sort(x)
    observed = float(ks_statistic_sorted(xs, np.asarray(fit.cdf(xs))))
    boot, failures = _bootstrap_stats(fit, B, x.size, _family_stream(seed, family))
    warnings: tuple[str, ...] = ()
    if failures > REFIT_FAILURE_LIMIT * B:
        warnings = (f"bootstrap-unstable: {failures} of {B} refits failed",)
    # relative slack guards against float noise when a replicate equals the observed statistic
    exceed = int(np.sum(boot >= observed * (1 - 1e-12)))
    return (1 + exceed) / (boot.size + 1), warnings


def full_fit(taus: Sequence[float], family: str, B: int = 999, seed: int = 20260430) -> HazardFit:
    """Fit plus naive and bootstrap KS diagnostics."""
    fit = fit_family(taus, family)
    stat, p_naive = ks_naive(taus, fit)
    p_boot, warns = ks_parametric_bootstrap(taus, family, B, seed, fit)
    return replace(fit, ks_stat=stat, ks_p_naive=p_naive, ks_p_boot=p_boot, warnings=warns)


def gof_verdict(fit: HazardFit) -> Verdict:
    """Rejected on a bootstrap p below 0.05; marginal when either KS p sits below 0.10."""
    p_boot = fit.ks_p_boot
    if p_boot is not None and p_boot < ALPHA_REJECT:
        return Verdict.REJECTED
    if p_boot is None and fit.ks_p_naive is not None and fit.ks_p_naive < ALPHA_REJECT:
        return Verdict.REJECTED
    ps = [p for p in (p_boot, fit.ks_p_naive) if p is not None]
    if ps and min(ps) < ALPHA_MARGINAL:
        return Verdict.MARGINAL
    return Verdict.ADEQUATE


@dataclass(frozen=True)
class ModelSelection:
    fits: tuple[HazardFit, ...]
    adopted: str | None
    note: str = ""

    def fit_for(self, family: str) -> HazardFit:
        for f in self.fits:
            if f.family == family:
                return f
        raise KeyError(family)

    @property
    def adopted_fit(self) -> HazardFit | None:
        return self.fit_for(self.adopted) if self.adopted else None


def select_model(fits: Sequence[HazardFit], threshold: float = AIC_THRESHOLD) -> ModelSelection:
    """Adopt the lowest-AIC family only if it beats the simplest family by more than
    ``threshold`` and is not rejected; otherwise adopt the simplest non-rejected family.
    """
    if len(fits) < 2:
        raise ValueError("model selection needs at least two fits")
    if len({f.n for f in fits}) != 1:
        raise ValueError("fits must share one sample")
    order = {fam: i for i, fam in enumerate(FAMILIES)}
    labelled = [replace(f, verdict=gof_verdict(f)) for f in fits]
    simplest = min(labelled, key=lambda f: (f.n_params, order[f.family]))
    best = min(labelled, key=lambda f: (f.aic, f.n_params, order[f.family]))
    adopted: HazardFit | None = None
    note = ""
    if best is not simplest and simplest.aic - best.aic > threshold and best.verdict is not Verdict.REJECTED:
        adopted = best
        note = f"{best.family} beats {simplest.family} by {simplest.aic - best.aic:.2f} AIC units"
    else:
        survivors = [f for f in labelled if f.verdict is not Verdict.REJECTED]
        if survivors:
            adopted = min(survivors, key=lambda f: (f.n_params, f.aic, order[f.family]))
            note = f"AIC advantage {simplest.aic - best.aic:.2f} does not justify {best.family}"
            if adopted is not simplest:
                note = f"{simplest.family} rejected; simplest surviving family kept"
        else:
            note = "no adequate model: every family rejected"
    out = tuple(replace(f, verdict=Verdict.ADOPTED) if f is adopted else f for f in labelled)
    return ModelSelection(out, adopted.family if adopted else None, note)


@dataclass(frozen=True)
class GroupFit:
    group: str
    period: str | None
    bucket: str | None
    selection: ModelSelection | None
    n: int
    skipped: str = ""


def fit_group(
    taus: Sequence[float],
    group: str,
    period: str | None = None,
    bucket: str | None = None,
    B: int = 999,
    seed: int = 20260430,
) -> GroupFit:
    """All three families with diagnostics and a selection; groups under three samples are skipped."""
    x = np.asarray(taus, dtype=float)
    if x.size < 3:
        return GroupFit(group, period, bucket, None, int(x.size), "fewer than 3 lead times")
    fits = []
    failed = []
    for fam in FAMILIES:
        try:
            fits.append(full_fit(x, fam, B, seed))
        except FitFailure as exc:
            failed.append(f"{fam}: {exc}")
    if len(fits) < 2:
        return GroupFit(group, period, bucket, None, int(x.size), "; ".join(failed))
    return GroupFit(group, period, bucket, select_model(fits), int(x.size), "; ".join(failed))


def fit_to_mapping(fit: HazardFit) -> dict:
    return {
        "family": fit.family,
        "params": dict(fit.params),
        "n": fit.n,
        "loglik": fit.loglik,
        "aic": fit.aic,
        "bic": fit.bic,
        "ks_stat": fit.ks_stat,
        "ks_p_naive": fit.ks_p_naive,
        "ks_p_boot": fit.ks_p_boot,
        "verdict": fit.verdict.value if fit.verdict else None,
        "warnings": list(fit.warnings),
    }


def fit_from_mapping(obj: dict) -> HazardFit:
    verdict = obj.get("verdict")
    return HazardFit(
        obj["family"],
        {k: float(v) for k, v in obj.get("params", {}).items()},
        int(obj["n"]),
        float(obj["loglik"]),
        obj.get("ks_stat"),
        obj.get("ks_p_naive"),
        obj.get("ks_p_boot"),
        Verdict(verdict) if verdict else None,
        tuple(obj.get("warnings", ())),
    )


def group_to_mapping(g: GroupFit) -> dict:
    sel = g.selection
    return {
        "group": g.group,
        "period": g.period,
        "bucket": g.bucket,
        "n": g.n,
        "skipped": g.skipped,
        "adopted": sel.adopted if sel else None,
        "note": sel.note if sel else "",
        "fits": [fit_to_mapping(f) for f in sel.fits] if sel else [],
    }


def group_from_mapping(obj: dict) -> GroupFit:
    fits = tuple(fit_from_mapping(f) for f in obj.get("fits", ()))
    sel = ModelSelection(fits, obj.get("adopted"), obj.get("note", "")) if fits else None
    return GroupFit(obj["group"], obj.get("period"), obj.get("bucket"), sel, int(obj["n"]), obj.get("skipped", ""))


def half_life(rate: float) -> float:
    return math.log(2.0) / rate


def weibull_mean(k: float, scale: float) -> float:
    return scale * math.gamma(1.0 + 1.0 / k)
