"""Static figures for the report directory, rendered off-screen."""

from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from deadline_ils.decay import survival_array  # noqa: E402
from deadline_ils.hazard import GroupFit  # noqa: E402
from deadline_ils.population import BUCKETS, PERIODS, AttritionTable, group_by_cell  # noqa: E402
from deadline_ils.scoring import ScoreRecord  # noqa: E402

_PNG_META = {"Software": None}


def _save(fig, path: str | Path) -> Path:
    p = Path(path)
    fig.tight_layout()
    fig.savefig(p, dpi=110, metadata=_PNG_META)
    plt.close(fig)
    return p


def plot_attrition(table: AttritionTable, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(7.5, 3.8))
    labels = [s.label for s in table.stages]
    ax.barh(range(len(labels)), table.counts, color="#4c72b0")
    ax.set_yticks(range(len(labels)), labels, fontsize=7)
    ax.invert_yaxis()
    for i, n in enumerate(table.counts):
        ax.text(n, i, f" {n}", va="center", fontsize=7)
    ax.set_xlabel("markets remaining")
    ax.set_title("Filter-chain attrition")
    return _save(fig, path)


def plot_score_distributions(records: Sequence[ScoreRecord], path: str | Path) -> Path:
    """Raw and adjusted scores per cell, as paired box plots."""
    raw = group_by_cell(records)
    adj = group_by_cell(records, lambda r: r.ils_dl_adj)
    cells = [(b, p) for b in BUCKETS for p in PERIODS if (b, p) in raw]
    fig, ax = plt.subplots(figsize=(8, 4))
    if cells:
        pos = np.arange(len(cells)) * 3.0
        ax.boxplot([raw[c] for c in cells], positions=pos, widths=0.8, patch_artist=True, boxprops={"facecolor": "#c7d4e8"})
        with_adj = [(i, c) for i, c in enumerate(cells) if c in adj]
        if with_adj:
            ax.boxplot(
                [adj[c] for _, c in with_adj],
                positions=[pos[i] + 1.0 for i, _ in with_adj],
                widths=0.8,
                patch_artist=True,
                boxprops={"facecolor": "#f1c6a8"},
            )
        ax.set_xticks(pos + 0.5, [f"{b}\n{p}" for b, p in cells], fontsize=6)
    ax.axhline(0.0, color="grey", lw=0.8, ls="--")
    ax.set_ylabel("score (blue raw, orange adjusted)")
    ax.set_title("Score distribution by cell")
    return _save(fig, path)


def plot_anchor_sensitivity(records: Sequence[ScoreRecord], path: str | Path) -> Path:
    pts = [(r.ils_dl, r.anchor_variants.get("24h")) for r in records if r.in_scope and r.anchor_variants.get("24h") is not None]
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    if pts:
        x, y = zip(*pts)
        ax.scatter(x, y, s=14, alpha=0.7)
        lo, hi = min(x + y), max(x + y)
        ax.plot([lo, hi], [lo, hi], color="grey", lw=0.8)
    ax.set_xlabel("score at T_event - 60 s")
    ax.set_ylabel("score at T_event - 24 h")
    ax.set_title("Anchor sensitivity")
    return _save(fig, path)


def plot_hazard_fits(groups: Sequence[GroupFit], taus: dict[str, Sequence[float]], path: str | Path) -> Path:
    """Empirical survival of lead times against each fitted family."""
    shown = [g for g in groups if g.selection is not None and g.group in taus]
    fig, axes = plt.subplots(1, max(1, len(shown)), figsize=(4.2 * max(1, len(shown)), 3.6), squeeze=False)
    for ax, g in zip(axes[0], shown):
        x = np.sort(np.asarray(taus[g.group], dtype=float))
        emp = 1.0 - np.arange(1, x.size + 1) / x.size
        ax.step(x, emp, where="post", color="black", lw=1, label="empirical")
        grid = np.linspace(0.0, x.max() * 1.05, 200)
        for f in g.selection.fits:
            if f.params:
                tag = " (adopted)" if f.family == g.selection.adopted else ""
                ax.plot(grid, survival_array(grid, f), lw=1.2, label=f"{f.family}{tag}")
        ax.set_title(f"{g.group} (n={g.n})", fontsize=9)
        ax.set_xlabel("lead time (days)")
        ax.set_ylabel("survival")
        ax.legend(fontsize=7)
    return _save(fig, path)


def plot_raw_vs_adjusted(records: Sequence[ScoreRecord], path: str | Path) -> Path:
    pts = [(r.ils_dl, r.ils_dl_adj) for r in records if r.in_scope and r.ils_dl_adj is not None]
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    if pts:
        x, y = zip(*pts)
        ax.scatter(x, y, s=14, alpha=0.7, color="#dd8452")
        lo, hi = min(x + y), max(x + y)
        ax.plot([lo, hi], [lo, hi], color="grey", lw=0.8)
    ax.set_xlabel("raw score")
    ax.set_ylabel("decay-adjusted score")
    ax.set_title("Decay adjustment")
    return _save(fig, path)
