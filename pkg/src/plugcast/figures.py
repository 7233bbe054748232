"""Matplotlib rendering for the report path.

Every function draws from already-computed summary data (five-number
summaries, loss histories) and writes a PNG next to the delimited output;
nothing here recomputes statistics. The Agg backend keeps rendering
headless-safe.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .evaluate import DAY_NAMES, GroupedDistribution

RC = {
    "figure.dpi": 110,
    "savefig.dpi": 150,
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "grid.linestyle": ":",
}

MONTH_NAMES = ("Jan", "Feb", "Mar", "Apr", "May", "Jun",
               "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")


def _group_tick(key: str, label: int) -> str:
    if key == "dow":
        return DAY_NAMES[label][:3]
    if key == "month":
        return MONTH_NAMES[label - 1]
    return f"{label:02d}"


def _bxp_stats(dist: GroupedDistribution) -> list[dict]:
    stats = []
    for label in dist.labels():
        g = dist.groups[label]
        stats.append(
            {
                "label": _group_tick(dist.key, label),
                "med": g.median,
                "q1": g.q1,
                "q3": g.q3,
                "whislo": g.minimum,
                "whishi": g.maximum,
            }
        )
    return stats


def save_grouped_boxplot(
    dist: GroupedDistribution,
    path: str | Path,
    title: str,
    ylabel: str,
) -> Path:
    """Box plot of one grouped distribution, whiskers at min and max."""
    with plt.rc_context(RC):
        width = max(4.0, 0.45 * len(dist.groups) + 1.5)
        fig, ax = plt.subplots(figsize=(width, 3.2))
        ax.bxp(_bxp_stats(dist), showfliers=False)
        ax.set_title(title)
        ax.set_ylabel(ylabel)
        if dist.key == "hour":
            ax.tick_params(axis="x", rotation=90)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)


def save_residual_boxplots(
    by_model: dict,
    path: str | Path,
) -> Path:
    """Per-day test-residual box plots, one panel per model."""
    labels = list(by_model)
    with plt.rc_context(RC):
        fig, axes = plt.subplots(
            1, len(labels), figsize=(3.4 * len(labels), 3.2), sharey=True
        )
        if len(labels) == 1:
            axes = [axes]
        for ax, label in zip(axes, labels):
            ax.bxp(_bxp_stats(by_model[label]), showfliers=False)
            ax.axhline(0.0, color="black", linewidth=0.8)
            ax.set_title(label)
            ax.tick_params(axis="x", rotation=45)
        axes[0].set_ylabel("test residual (prediction - actual)")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)


def save_loss_curves(histories: dict, path: str | Path) -> Path:
    """Training and validation loss per epoch for each trained network."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        for label, history in histories.items():
            epochs = range(1, len(history["train"]) + 1)
            (line,) = ax.plot(epochs, history["train"], label=f"{label} train")
            ax.plot(
                epochs, history["validation"],
                linestyle="--", color=line.get_color(), label=f"{label} val",
            )
        ax.set_xlabel("epoch")
        ax.set_ylabel("mean squared error")
        ax.set_yscale("log")
        ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)
