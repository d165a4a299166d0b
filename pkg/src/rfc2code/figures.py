"""Render metric and ablation figures to files next to the delimited output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


STAGE_LABELS = {
    "base": "Base", "type": "Type", "arg_order": "Arg. Order",
    "pred_order": "Pred. Order", "distributivity": "Distrib.",
    "associativity": "Assoc.",
}


def plot_winnowing(stats, path: Path, title: str = "") -> None:
    """min/avg/max LF counts per pipeline stage, log-scaled."""
    fig, ax = plt.subplots(figsize=(5.2, 2.8))
    stages = [STAGE_LABELS.get(s.stage, s.stage) for s in stats]
    ax.plot(stages, [s.maximum for s in stats], "r:o", label="max",
            markersize=4)
    ax.plot(stages, [s.average for s in stats], "k-o", label="avg",
            markersize=4)
    ax.plot(stages, [s.minimum for s in stats], "c:o", label="min",
            markersize=4)
    ax.set_yscale("log")
    ax.set_ylabel("# of Logical Forms")
    ax.grid(axis="x", linestyle=":", linewidth=0.5)
    if title:
        ax.set_title(title, fontsize=10)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_check_effect(stats, path: Path, title: str = "") -> None:
    """Isolated effect of each check: mean LFs removed (with standard
    error) and the number of affected sentences."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(6.4, 2.8))
    labels = [STAGE_LABELS.get(s.check, s.check) for s in stats]
    colors = ["orange", "c", "purple", "olive"]
    ax1.bar(labels, [s.mean_removed for s in stats],
            yerr=[s.stderr for s in stats], color=colors, capsize=3)
    ax1.set_ylabel("# of LFs per Sentence")
    ax2.bar(labels, [s.affected for s in stats], color=colors)
    ax2.set_ylabel("# of Affected Sentences")
    for ax in (ax1, ax2):
        ax.tick_params(axis="x", labelsize=7, rotation=20)
    if title:
        fig.suptitle(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_ablation(tables, path: Path, title: str = "") -> None:
    """Increase/decrease/zero sentence counts per ablation mode."""
    fig, ax = plt.subplots(figsize=(5.2, 2.8))
    modes = [t.mode for t in tables]
    width = 0.25
    xs = range(len(modes))
    ax.bar([x - width for x in xs], [t.increased for t in tables], width,
           label="increase", color="orange")
    ax.bar(list(xs), [t.decreased for t in tables], width,
           label="decrease", color="c")
    ax.bar([x + width for x in xs], [t.zeroed for t in tables], width,
           label="zero", color="gray")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(modes, fontsize=8)
    ax.set_ylabel("# of Sentences")
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
