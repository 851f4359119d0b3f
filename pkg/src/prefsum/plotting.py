"""Figure rendering for analysis tables.

Every analysis CSV gets a companion PNG next to it.  Rendering is
file-only (Agg backend); nothing here opens a window.
"""

from __future__ import annotations

from pathlib import Path
from typing import List

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_FIGSIZE = (6.0, 3.8)


def _finish(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_budget_curve(rows: List[dict], path) -> None:
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    budgets = [r["budget"] for r in rows]
    for metric, color in (("rouge1", "tab:blue"), ("rouge2", "tab:orange")):
        means = [r[f"mean_{metric}"] for r in rows]
        stds = [r[f"std_{metric}"] for r in rows]
        ax.errorbar(budgets, means, yerr=stds, marker="o", capsize=3,
                    label=metric.upper(), color=color)
    ax.set_xlabel("query budget")
    ax.set_ylabel("score")
    ax.set_title("Summary quality vs. query budget")
    ax.legend()
    ax.grid(alpha=0.3)
    _finish(fig, path)


def plot_strategy_bars(rows: List[dict], path) -> None:
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    names = [r["strategy"] for r in rows]
    means = [r["mean_rouge1"] for r in rows]
    stds = [r["std_rouge1"] for r in rows]
    ax.bar(range(len(names)), means, yerr=stds, capsize=3, color="tab:blue")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("mean ROUGE-1")
    ax.set_title("Active-learning strategies")
    ax.grid(alpha=0.3, axis="y")
    _finish(fig, path)


def plot_unit_convergence(rows: List[dict], path) -> None:
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    budgets = sorted(
        int(k.split("_at_")[1]) for k in rows[0] if k.startswith("tau_at_")
    )
    for row in rows:
        taus = [row[f"tau_at_{b}"] for b in budgets]
        ax.plot(budgets, taus, marker="o",
                label=f"{row['unit']} (converges at {row['rounds_to_converge']})")
    ax.set_xlabel("query budget")
    ax.set_ylabel("mean Kendall tau")
    ax.set_title("Feedback needed per concept unit")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    _finish(fig, path)


def plot_feature_curve(rows: List[dict], path) -> None:
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    sizes = [r["n_features"] for r in rows]
    for metric, color in (("rouge1", "tab:blue"), ("rouge2", "tab:orange")):
        means = [r[f"mean_{metric}"] for r in rows]
        stds = [r[f"std_{metric}"] for r in rows]
        ax.errorbar(sizes, means, yerr=stds, marker="s", capsize=3,
                    label=metric.upper(), color=color)
    ax.set_xlabel("ranker feature count")
    ax.set_ylabel("score")
    ax.set_title("Ranker features vs. summary quality")
    ax.legend()
    ax.grid(alpha=0.3)
    _finish(fig, path)


def plot_ablation_bars(rows: List[dict], path) -> None:
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    names = [r["variant"] for r in rows]
    x = range(len(names))
    width = 0.35
    ax.bar([i - width / 2 for i in x], [r["mean_rouge1"] for r in rows],
           width, yerr=[r["std_rouge1"] for r in rows], capsize=3,
           label="ROUGE-1", color="tab:blue")
    ax.bar([i + width / 2 for i in x], [r["mean_value"] for r in rows],
           width, yerr=[r["std_value"] for r in rows], capsize=3,
           label="ground-truth value", color="tab:green")
    ax.set_xticks(list(x))
    ax.set_xticklabels(names)
    ax.set_ylabel("score")
    ax.set_title("Pipeline ablations")
    ax.legend()
    ax.grid(alpha=0.3, axis="y")
    _finish(fig, path)


def plot_learning_curve(rows: List[dict], path) -> None:
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot([r["episode"] for r in rows], [r["greedy_value"] for r in rows],
            marker=".", color="tab:purple")
    ax.set_xlabel("episode")
    ax.set_ylabel("greedy value")
    ax.set_title("Policy training curve")
    ax.grid(alpha=0.3)
    _finish(fig, path)


ANALYSIS_PLOTS = {
    "budget": plot_budget_curve,
    "strategy": plot_strategy_bars,
    "unit": plot_unit_convergence,
    "feature": plot_feature_curve,
    "ablation": plot_ablation_bars,
}
