"""Figure rendering for the report files.

Every report writer has a matching figure: threshold sweep curves, the
correlation heatmap, dominance classification bars, and the per-fold
weight/change summary.  Figures are rendered straight to image files with
the Agg backend; nothing here opens a window.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluate import CorrelationReport, CrossValidationReport, SweepPoint
from .metrics import METRIC_NAMES, NUM_METRICS
from .rerank import SELECTABLE, STRICTLY_DOMINATED, WEAKLY_DOMINATED

_CLASS_ORDER = (SELECTABLE, WEAKLY_DOMINATED, STRICTLY_DOMINATED)
_CLASS_COLORS = {"selectable": "#2a9d8f", "weakly_dominated": "#e9c46a",
                 "strictly_dominated": "#e76f51"}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def sweep_figure(points: Sequence[SweepPoint], path: str | Path) -> Path:
    """Objective and mean-change curves against the revenue threshold."""
    thetas = [p.theta1 for p in points]
    fig, (ax_obj, ax_xi) = plt.subplots(1, 2, figsize=(11, 4))

    ax_obj.plot(thetas, [p.train_objective_mean for p in points],
                marker="o", label="train")
    ax_obj.plot(thetas, [p.test_objective_mean for p in points],
                marker="s", label="test")
    ax_obj.set_xlabel(r"$\theta_1$ (revenue-loss cap)")
    ax_obj.set_ylabel("mean objective (sum of rank scores)")
    ax_obj.invert_xaxis()
    ax_obj.legend()
    ax_obj.grid(alpha=0.3)

    train_xi = np.array([p.mean_changes("train") for p in points])
    for k, name in enumerate(METRIC_NAMES):
        ax_xi.plot(thetas, train_xi[:, k], marker=".", label=name)
    ax_xi.set_xlabel(r"$\theta_1$ (revenue-loss cap)")
    ax_xi.set_ylabel(r"mean training change $\xi_k$")
    ax_xi.axhline(0.0, color="gray", lw=0.8)
    ax_xi.invert_xaxis()
    ax_xi.legend(fontsize=8, ncol=2)
    ax_xi.grid(alpha=0.3)

    fig.suptitle("Effect of the revenue-loss cap")
    return _save(fig, path)


def correlation_figure(report: CorrelationReport, path: str | Path) -> Path:
    """Annotated heatmap of the 6x6 metric correlation matrix."""
    fig, ax = plt.subplots(figsize=(6, 5))
    m = np.ma.masked_invalid(report.matrix)
    cmap = plt.get_cmap("RdBu_r").copy()
    cmap.set_bad("#d0d0d0")
    im = ax.imshow(m, vmin=-1, vmax=1, cmap=cmap)
    ax.set_xticks(range(NUM_METRICS), METRIC_NAMES, rotation=45, ha="right")
    ax.set_yticks(range(NUM_METRICS), METRIC_NAMES)
    for i in range(NUM_METRICS):
        for j in range(NUM_METRICS):
            v = report.matrix[i][j] if not np.ma.is_masked(m[i, j]) else None
            label = "n/a" if v is None or not np.isfinite(v) else f"{v:.2f}"
            ax.text(j, i, label, ha="center", va="center", fontsize=8)
    fig.colorbar(im, ax=ax, shrink=0.85)
    ax.set_title(f"Raw metric correlations over {report.n} ground-truth ads")
    return _save(fig, path)


def dominance_figure(tally: dict[str, int], path: str | Path) -> Path:
    """Bar chart of candidate counts per dominance class."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    counts = [tally.get(c, 0) for c in _CLASS_ORDER]
    labels = [c.replace("_", " ") for c in _CLASS_ORDER]
    bars = ax.bar(labels, counts, color=[_CLASS_COLORS[c] for c in _CLASS_ORDER])
    ax.bar_label(bars)
    ax.set_ylabel("candidate ads")
    ax.set_title("Dominance classification of auction candidates")
    return _save(fig, path)


def fold_figure(report: CrossValidationReport, path: str | Path) -> Path:
    """Per-fold optimal weights and the spread of measured changes."""
    fig, (ax_w, ax_xi) = plt.subplots(1, 2, figsize=(11, 4))

    usable = [f for f in report.folds if not f.infeasible]
    if usable:
        weights = np.array([f.weights.as_array() for f in usable])
        im = ax_w.imshow(weights, vmin=0, vmax=1, cmap="viridis", aspect="auto")
        ax_w.set_xticks(range(NUM_METRICS), METRIC_NAMES, rotation=45, ha="right")
        ax_w.set_yticks(range(len(usable)), [f"fold {f.fold + 1}" for f in usable])
        fig.colorbar(im, ax=ax_w, shrink=0.85, label="weight")
        ax_w.set_title("Optimal weights per fold")

        x = np.arange(NUM_METRICS)
        for side, offset, color in (("train", -0.12, "#1f77b4"),
                                    ("test", 0.12, "#d62728")):
            xi = np.array(
                [getattr(f, f"{side}_changes").as_array() for f in usable]
            )
            ax_xi.errorbar(
                x + offset, xi.mean(axis=0),
                yerr=xi.std(axis=0, ddof=1) if len(usable) > 1 else None,
                fmt="o", capsize=3, label=side, color=color,
            )
        ax_xi.axhline(0.0, color="gray", lw=0.8)
        ax_xi.set_xticks(x, METRIC_NAMES, rotation=45, ha="right")
        ax_xi.set_ylabel(r"relative change $\xi_k$")
        ax_xi.legend()
        ax_xi.set_title("Mean change per metric across folds")
    else:
        for ax in (ax_w, ax_xi):
            ax.text(0.5, 0.5, "all folds infeasible", ha="center", va="center")
            ax.set_axis_off()
    return _save(fig, path)
