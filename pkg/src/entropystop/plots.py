"""Figure rendering for run traces, sweep distributions, and reports.

All functions write a PNG next to the delimited output and return the path;
nothing is shown interactively (Agg backend).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_trace(result, path, title: str = ""):
    """Entropy and (when available) AUC curves with the selected iteration."""
    fig, ax = plt.subplots(figsize=(7, 4))
    plotted = False
    if result.entropy_trace is not None and len(result.entropy_trace) > 1:
        iters = np.arange(len(result.entropy_trace))
        ax.plot(iters, result.entropy_trace, color="tab:blue", label="loss entropy")
        ax.set_ylabel("loss entropy", color="tab:blue")
        plotted = True
    if result.auc_trace is not None and len(result.auc_trace) > 1:
        ax2 = ax.twinx() if plotted else ax
        iters = np.arange(len(result.auc_trace))
        ax2.plot(iters, result.auc_trace, color="tab:orange", label="AUC")
        ax2.set_ylabel("AUC", color="tab:orange")
        plotted = True
    if not plotted and result.train_loss_trace is not None:
        iters = np.arange(len(result.train_loss_trace))
        ax.plot(iters, result.train_loss_trace, color="tab:green", label="train loss")
        ax.set_ylabel("train loss")
    ax.axvline(result.selected_iter, color="red", linestyle="--", linewidth=1,
               label=f"selected iter = {result.selected_iter}")
    ax.set_xlabel("iteration")
    ax.set_title(title or f"{result.dataset} [{result.mode}]")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_auc_distributions(auc_by_mode: dict, path, title: str = "AUC across HP configurations"):
    """Box + scatter of per-config AUC, one column per mode."""
    modes = [m for m in auc_by_mode if len(auc_by_mode[m]) > 0]
    fig, ax = plt.subplots(figsize=(1.8 * max(len(modes), 2) + 2, 4))
    data = [np.asarray(auc_by_mode[m], dtype=float) for m in modes]
    ax.boxplot(data, tick_labels=modes, showfliers=False)
    for i, vals in enumerate(data, start=1):
        jitter = (np.arange(len(vals)) % 7 - 3) * 0.015
        ax.plot(np.full(len(vals), i) + jitter, vals, "o", markersize=3, alpha=0.6)
    ax.set_ylabel("AUC")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_report(rows: list[dict], path, title: str = "Naive vs entropy-stopped training"):
    """Grouped bars of mean AUC per row with the time ratio annotated.

    ``rows`` come from the report table: dicts with keys ``group``,
    ``naive_auc``, ``entropy_auc``, ``time_ratio`` and ``p_value``.
    """
    groups = [r["group"] for r in rows]
    naive = [r["naive_auc"] for r in rows]
    entropy = [r["entropy_auc"] for r in rows]
    x = np.arange(len(groups))
    width = 0.38
    fig, ax = plt.subplots(figsize=(max(6, 1.6 * len(groups)), 4))
    ax.bar(x - width / 2, naive, width, label="naive", color="tab:gray")
    ax.bar(x + width / 2, entropy, width, label="entropy", color="tab:blue")
    for i, r in enumerate(rows):
        p = r.get("p_value")
        note = f"t={r['time_ratio']:.2f}" if r.get("time_ratio") is not None else ""
        if p is not None:
            note += f"\np={p:.3g}" if isinstance(p, float) else f"\np={p}"
        ax.annotate(note, (x[i], max(naive[i], entropy[i])), ha="center",
                    va="bottom", fontsize=7)
    ax.set_xticks(x)
    ax.set_xticklabels(groups, rotation=20, ha="right")
    ax.set_ylabel("mean AUC")
    ax.set_ylim(0, 1.12)
    ax.legend()
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
