"""Report figures rendered alongside the delimited evaluation output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from triplex.evaluation import PositionCounts, PRCurve  # noqa: E402


def render_pr_curve(curve: PRCurve, out_path: str | Path,
                    title: str = "Precision-recall curve") -> Path:
    out_path = Path(out_path)
    fig, ax = plt.subplots(figsize=(5, 4))
    recalls = [p.recall for p in curve.points]
    precisions = [p.precision for p in curve.points]
    ax.plot(recalls, precisions, marker="o", linewidth=1.5)
    ax.set_xlabel("Recall")
    ax.set_ylabel("Precision")
    ax.set_xlim(0.0, 1.02)
    ax.set_ylim(0.0, 1.02)
    ax.grid(True, alpha=0.3)
    ax.set_title(f"{title} (AUC = {curve.auc:.3f})")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def render_position_counts(counts: PositionCounts, out_path: str | Path,
                           title: str = "Relation positions") -> Path:
    out_path = Path(out_path)
    fig, ax = plt.subplots(figsize=(5, 4))
    bins = ["left", "middle", "right"]
    values = [counts.left, counts.middle, counts.right]
    ax.bar(bins, values, color=["#c44e52", "#4c72b0", "#c44e52"])
    for i, v in enumerate(values):
        ax.text(i, v, str(v), ha="center", va="bottom")
    ax.set_ylabel("Gold triples")
    ax.set_title(f"{title} (outside pair: {100 * counts.outside_fraction:.1f}%)")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
