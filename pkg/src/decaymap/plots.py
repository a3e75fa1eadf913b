"""Report figures.  Agg backend, no timestamps in metadata, so reruns are byte-identical."""

from __future__ import annotations

import os
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .classifier import CorpusReport  # noqa: E402
from .impact import ImpactReport  # noqa: E402
from .prioritizer import FileMetricsRow  # noqa: E402

_PNG_META = {"Software": None}


def _save(fig, path: str | os.PathLike) -> None:
    fig.tight_layout()
    fig.savefig(path, format="png", dpi=100, metadata=_PNG_META)
    plt.close(fig)


def plot_rank(rows: Sequence[FileMetricsRow], sort_key: str, path: str | os.PathLike, top: int = 20) -> None:
    shown = [r for r in rows if getattr(r, sort_key) is not None][:top]
    fig, ax = plt.subplots(figsize=(8, 0.3 * max(len(shown), 3) + 1.2))
    labels = [r.current_path for r in shown][::-1]
    vals = [getattr(r, sort_key) for r in shown][::-1]
    if sort_key == "topCochanged":
        vals = [len(v) for v in vals]
    ax.barh(range(len(vals)), vals, color="#4c72b0")
    ax.set_yticks(range(len(vals)), labels, fontsize=7)
    ax.set_xlabel(sort_key)
    ax.set_title(f"top {len(shown)} files by {sort_key}")
    _save(fig, path)


def plot_classification(report: CorpusReport, path: str | os.PathLike) -> None:
    pct = report.percentages
    cats = list(pct)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(cats + ["union"], [pct[c] for c in cats] + [report.union_pct], color=["#55a868"] * len(cats) + ["#c44e52"])
    ax.set_ylabel("% of diffs")
    ax.set_title(f"improvement labels ({report.total} diffs)")
    ax.tick_params(axis="x", labelrotation=30, labelsize=8)
    _save(fig, path)


def plot_impact(report: ImpactReport, samples: dict[str, tuple[Sequence[float], Sequence[float]]], path: str | os.PathLike) -> None:
    """One pre/post boxplot per metric in ``samples`` (empty metrics get a blank panel)."""
    names = list(samples)
    fig, axes = plt.subplots(1, max(len(names), 1), figsize=(3 * max(len(names), 1), 3.2), squeeze=False)
    for ax, name in zip(axes[0], names):
        pre, post = samples[name]
        if len(pre) and len(post):
            ax.boxplot([list(pre), list(post)], showfliers=False)
            ax.set_xticks([1, 2], ["pre", "post"])
        else:
            ax.text(0.5, 0.5, "no data", ha="center", va="center", transform=ax.transAxes)
            ax.set_xticks([])
        ax.set_title(name, fontsize=9)
    fig.suptitle(f"{report.name} ({report.type})", fontsize=10)
    _save(fig, path)
