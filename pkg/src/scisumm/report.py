"""Figures written next to the CSV outputs."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .rouge import COLUMNS  # noqa: E402

_META = {"Software": None}


def _save(fig, path: Union[str, Path]) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)
    return path


def plot_training_log(log, path: Union[str, Path]) -> Path:
    """Train and validation loss per epoch, best epoch marked."""
    epochs = [e.epoch for e in log.epochs]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, [e.train_loss for e in log.epochs], label="train (dropout on)")
    ax.plot(epochs, [e.val_loss for e in log.epochs], label="validation")
    if log.best_epoch:
        ax.axvline(log.best_epoch, color="grey", linestyle=":", label=f"best epoch {log.best_epoch}")
    ax.set_xlabel("epoch")
    ax.set_ylabel("cross entropy (nats)")
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_rouge(per_paper: Mapping[str, Mapping[str, float]], means: Mapping[str, float],
               path: Union[str, Path], title: str = "") -> Path:
    """Mean of each ROUGE column with per-paper points overlaid."""
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = range(len(COLUMNS))
    ax.bar(xs, [100 * means[c] for c in COLUMNS], color="#8fb3d9", width=0.6)
    for x, c in zip(xs, COLUMNS):
        vals = [100 * s[c] for s in per_paper.values()]
        ax.scatter([x] * len(vals), vals, color="k", s=8, zorder=3)
    ax.set_xticks(list(xs))
    ax.set_xticklabels(["2-R", "2-F", "3-F", "SU4-F"])
    ax.set_ylabel("ROUGE (x100)")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_summary_lengths(lengths: Sequence[int], limit: int, path: Union[str, Path]) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.hist(lengths, bins=min(20, max(5, len(lengths))), color="#b5d99c")
    ax.axvline(limit, color="r", linestyle="--", label=f"limit {limit}")
    ax.set_xlabel("summary length (words)")
    ax.set_ylabel("papers")
    ax.legend(frameon=False)
    return _save(fig, path)
