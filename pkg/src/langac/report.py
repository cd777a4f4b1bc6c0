"""Report rendering: line-delimited records plus matplotlib figures.

Every reporting command writes machine-readable JSONL next to a small set of
PNG figures summarizing the same numbers, so a run's outcome can be diffed
and eyeballed from the same directory.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def write_records(path: str | Path, records: list[dict]) -> None:
    with Path(path).open("w") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def render_learning_curves(
    curves: dict[str, list[float]], path: str | Path, ylabel: str = "J(pi)"
) -> None:
    """One line per run: objective value against iteration."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, values in sorted(curves.items()):
        ax.plot(range(len(values)), values, marker="o", markersize=3, label=name)
    ax.set_xlabel("iteration")
    ax.set_ylabel(ylabel)
    if len(curves) <= 12:
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_rank_scatter(
    sentiments: np.ndarray, q_values: np.ndarray, path: str | Path
) -> None:
    """Critic scalars against exact Q-values; rank agreement shows as monotone."""
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.scatter(q_values, sentiments, s=12, alpha=0.6)
    lo = min(q_values.min(), sentiments.min())
    hi = max(q_values.max(), sentiments.max())
    ax.plot([lo, hi], [lo, hi], color="gray", linewidth=0.8, linestyle="--")
    ax.set_xlabel("exact Q(s, a)")
    ax.set_ylabel("critic scalar")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_residual_bars(
    residuals: dict[str, tuple[float, float]], path: str | Path
) -> None:
    """Log-scale bars of measured residual against its tolerance per check."""
    names = sorted(residuals)
    measured = [max(residuals[n][0], 1e-18) for n in names]
    tolerance = [residuals[n][1] for n in names]
    x = np.arange(len(names))
    fig, ax = plt.subplots(figsize=(max(6, 0.8 * len(names)), 4))
    ax.bar(x - 0.2, measured, width=0.4, label="measured")
    ax.bar(x + 0.2, tolerance, width=0.4, label="tolerance")
    ax.set_yscale("log")
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=30, ha="right", fontsize=7)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_winrate_bars(per_seed: dict[str, float], path: str | Path) -> None:
    names = sorted(per_seed)
    values = [per_seed[n] for n in names]
    fig, ax = plt.subplots(figsize=(max(4, 0.9 * len(names)), 4))
    ax.bar(names, values)
    ax.set_ylim(0, 1)
    ax.set_ylabel("success rate")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
