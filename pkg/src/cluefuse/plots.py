"""Figure rendering for evaluation reports and latency benchmarks.

All figures are written straight to files (Agg backend); nothing here
opens a window.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import EvalReport

_DPI = 150


def plot_report(report: EvalReport, path: str | Path) -> None:
    """Bar chart of top-k retrieval accuracy for one run."""
    ks = sorted(report.topk_accuracy)
    values = [100.0 * report.topk_accuracy[k] for k in ks]
    fig, ax = plt.subplots(figsize=(6, 4))
    bars = ax.bar([f"top-{k}" for k in ks], values, color="#4878cf", width=0.6)
    ax.bar_label(bars, fmt="%.1f", padding=2, fontsize=9)
    ax.set_ylim(0, 105)
    ax.set_ylabel("accuracy (%)")
    ax.set_title(f"retrieval accuracy: {report.run_tag}")
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def plot_comparison(report_a: EvalReport, report_b: EvalReport, path: str | Path) -> None:
    """Grouped bars comparing two runs at each k."""
    ks = sorted(set(report_a.topk_accuracy) & set(report_b.topk_accuracy))
    a = [100.0 * report_a.topk_accuracy[k] for k in ks]
    b = [100.0 * report_b.topk_accuracy[k] for k in ks]
    x = range(len(ks))
    width = 0.38
    fig, ax = plt.subplots(figsize=(6.5, 4))
    ax.bar([i - width / 2 for i in x], a, width, label=report_a.run_tag, color="#c44e52")
    ax.bar([i + width / 2 for i in x], b, width, label=report_b.run_tag, color="#4878cf")
    ax.set_xticks(list(x), [f"top-{k}" for k in ks])
    ax.set_ylim(0, 105)
    ax.set_ylabel("accuracy (%)")
    ax.set_title("run comparison")
    ax.legend()
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def plot_latency(latencies_by_mode: dict[str, list[float]], path: str | Path) -> None:
    """Per-query latency distributions, one sorted curve per mode."""
    fig, ax = plt.subplots(figsize=(6.5, 4))
    for mode, latencies in sorted(latencies_by_mode.items()):
        if not latencies:
            continue
        ordered = sorted(latencies)
        quantiles = [(i + 1) / len(ordered) * 100.0 for i in range(len(ordered))]
        ax.plot(quantiles, [1000.0 * v for v in ordered], label=mode, linewidth=1.6)
    ax.set_xlabel("percentile of queries")
    ax.set_ylabel("latency (ms)")
    ax.set_title("retrieve+fuse latency per query")
    ax.axvline(50, color="gray", linestyle=":", alpha=0.6)
    ax.axvline(95, color="gray", linestyle=":", alpha=0.6)
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
