"""Figure rendering for run outputs (written next to the CSV)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def render_regret_figure(trace, path, title=None):
    """Mean cumulative regret on a log-t axis with a +/- one-std band."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.semilogx(trace.t, trace.mean_regret, color="tab:blue", lw=1.5, label="mean regret")
    if trace.reps > 1:
        ax.fill_between(
            trace.t,
            trace.mean_regret - trace.std_regret,
            trace.mean_regret + trace.std_regret,
            color="tab:blue", alpha=0.2, lw=0,
            label="+/- 1 std",
        )
    ax.set_xlabel("t")
    ax.set_ylabel("cumulative regret")
    if title:
        ax.set_title(title)
    ax.legend(loc="upper left", frameon=False)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_mode_counts_figure(trace, path, title=None):
    """Cumulative exploration vs exploitation step counts over time."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.semilogx(trace.t, trace.explore_count_mean, lw=1.5, label="recorded (warm-up + explore)")
    ax.semilogx(trace.t, trace.exploit_count_mean, lw=1.5, label="exploit")
    ax.set_xlabel("t")
    ax.set_ylabel("mean cumulative steps")
    if title:
        ax.set_title(title)
    ax.legend(loc="upper left", frameon=False)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
