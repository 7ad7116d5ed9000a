"""Minimal static SVG renderings of the diagnostic outputs.

matplotlib is imported lazily so the rest of the package stays usable in
headless or plotting-free environments.
"""
from __future__ import annotations

import numpy as np


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def pc_plot(matrix, feature_names, path, weights=None) -> None:
    """Parallel-coordinate plot: one line per region across coefficient axes."""
    plt = _plt()
    matrix = np.asarray(matrix)
    labels = list(feature_names) + ["intercept"]
    fig, ax = plt.subplots(figsize=(max(6, 0.8 * len(labels)), 4))
    xs = np.arange(len(labels))
    if weights is None:
        weights = np.ones(matrix.shape[0])
    weights = np.asarray(weights, dtype=np.float64)
    alphas = 0.25 + 0.75 * weights / weights.max()
    for row, alpha in zip(matrix, alphas):
        ax.plot(xs, row, color="tab:blue", alpha=float(alpha), linewidth=1)
    ax.axhline(0.0, color="gray", linewidth=0.5)
    ax.set_xticks(xs, labels, rotation=45, ha="right")
    ax.set_ylabel("standardized coefficient")
    ax.set_title("Local linear model coefficients by region")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def importance_plot(report, feature_names, path, top: int = 10) -> None:
    """Coefficient distributions (top) and the most important features (bottom)."""
    plt = _plt()
    order = np.argsort(report.ranks)[:top]
    fig, (ax_box, ax_bar) = plt.subplots(2, 1, figsize=(max(6, 0.8 * len(order)), 7))
    ax_box.boxplot(
        [report.coefficients[:, j] for j in order],
        tick_labels=[feature_names[j] for j in order],
    )
    ax_box.axhline(0.0, color="gray", linewidth=0.5)
    ax_box.set_ylabel("LLM coefficient")
    ax_box.set_title("Coefficient distribution across regions")
    ax_bar.bar([feature_names[j] for j in order], report.scores[order], color="tab:blue")
    ax_bar.set_ylabel("importance")
    ax_bar.set_title("Most important features")
    for ax in (ax_box, ax_bar):
        ax.tick_params(axis="x", rotation=45)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def profile_plot(segments, path, feature_name=None) -> None:
    """Per-region line segments of one feature's local linear effect."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4))
    if segments:
        weights = np.array([s.weight for s in segments], dtype=np.float64)
        widths = 0.5 + 2.5 * weights / weights.max()
        for seg, lw in zip(segments, widths):
            xs = np.array([seg.lo, seg.hi])
            ax.plot(xs, seg.slope * xs + seg.intercept, linewidth=float(lw),
                    label=f"region {seg.region_id} (n={seg.weight})")
        if len(segments) <= 10:
            ax.legend(fontsize=8)
    name = feature_name if feature_name is not None else (
        f"feature {segments[0].feature}" if segments else "feature"
    )
    ax.set_xlabel(name)
    ax.set_ylabel("logit")
    ax.set_title(f"Local linear profile: {name}")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
