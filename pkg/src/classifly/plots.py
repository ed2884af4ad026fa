"""Matplotlib renderers for the report-producing commands.

Figures are written next to the delimited outputs as PNG; the CSV/JSON
files stay the canonical artifacts and are what reproducibility is checked
against.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .reference import FEATURE_GROUPS

_GROUP_COLORS = {
    group.value: color
    for group, color in zip(FEATURE_GROUPS, plt.cm.tab20(np.linspace(0, 0.95, len(FEATURE_GROUPS))))
}

_SAVE_KW = {"dpi": 110, "metadata": {"Software": "classifly"}}


def save_correlation_heatmap(matrix, path, title="Feature correlation"):
    matrix = np.asarray(matrix, dtype=float)
    fig, ax = plt.subplots(figsize=(7.5, 6.5))
    image = ax.imshow(matrix, vmin=-1.0, vmax=1.0, cmap="RdBu_r", interpolation="nearest")
    ax.set_title(title)
    ax.set_xlabel("feature index")
    ax.set_ylabel("feature index")
    fig.colorbar(image, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_rmi_bars(report, path):
    values = [entry["rmi_percent"] for entry in report.features]
    colors = [_GROUP_COLORS[entry["group"]] for entry in report.features]
    fig, ax = plt.subplots(figsize=(max(8.0, len(values) * 0.09), 4.5))
    ax.bar(np.arange(len(values)), values, color=colors, width=0.9)
    ax.set_xlabel("feature")
    ax.set_ylabel("relative mutual information [%]")
    ax.set_title("Per-feature RMI (colors = physical feature groups)")
    handles = [plt.Rectangle((0, 0), 1, 1, color=_GROUP_COLORS[g]) for g in report.group_means]
    ax.legend(handles, list(report.group_means), fontsize=7, ncol=3, frameon=False)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_confusion_heatmap(report, path):
    matrix = np.asarray(report.confusion, dtype=float)
    fig, ax = plt.subplots(figsize=(7.0, 6.0))
    image = ax.imshow(matrix, cmap="Blues", interpolation="nearest")
    ax.set_xticks(range(len(report.class_names)), report.class_names, rotation=45, ha="right")
    ax.set_yticks(range(len(report.class_names)), report.class_names)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title(f"Confusion matrix (accuracy {report.accuracy:.3f})")
    threshold = matrix.max() / 2 if matrix.max() else 0.5
    for i in range(matrix.shape[0]):
        for j in range(matrix.shape[1]):
            ax.text(j, i, int(matrix[i, j]), ha="center", va="center", fontsize=8,
                    color="white" if matrix[i, j] > threshold else "black")
    fig.colorbar(image, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_sweep_curves(cells, path):
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    q_values = sorted({c.q for c in cells})
    f_values = sorted({c.f_min for c in cells})
    if len(f_values) > 1:
        for q in q_values:
            rows = sorted((c for c in cells if c.q == q), key=lambda c: c.f_min)
            ax.errorbar([c.f_min for c in rows], [c.mean_accuracy for c in rows],
                        yerr=[c.std_accuracy for c in rows], marker="o", capsize=3,
                        label=f"q={q}")
        ax.set_xlabel("minimum flights per aircraft (f_min)")
    else:
        for f_min in f_values:
            rows = sorted((c for c in cells if c.f_min == f_min), key=lambda c: c.q)
            ax.errorbar([c.q for c in rows], [c.mean_accuracy for c in rows],
                        yerr=[c.std_accuracy for c in rows], marker="o", capsize=3,
                        label=f"f_min={f_min}")
        ax.set_xlabel("feature quantiles (q)")
    ax.set_ylabel("mean held-out accuracy")
    ax.set_ylim(0.0, 1.0)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_category_bars(summary_rows, path):
    labels = [row["category"] for row in summary_rows]
    counts = [row["count"] for row in summary_rows]
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    ax.bar(labels, counts, color="#377eb8")
    ax.set_ylabel("aircraft")
    ax.set_title("Unknown-aircraft classification")
    plt.setp(ax.get_xticklabels(), rotation=45, ha="right")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
