"""Render stats-report and evaluation figures to image files.

Figures sit alongside the delimited outputs; they are a convenience view
of the JSON reports and never feed back into the pipeline.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def _bar(ax, labels, values, title, xlabel, ylabel="count"):
    ax.bar(range(len(labels)), values, color="#4878a8")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=45 if any(len(str(l)) > 4 for l in labels) else 0)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)


def render_stats_figures(stats: dict, out_dir: str | Path) -> list[Path]:
    """Histogram figures for an emit-dataset stats report."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    panels = [
        ("sample_kinds.png", stats["counts_by_kind"], "Samples by kind", "kind"),
        ("subset_sizes.png", stats["subset_size_histogram"], "Perturbations per hard negative", "ops applied"),
        ("severity_levels.png", stats["severity_histogram"], "Severity labels", "level"),
        ("scores.png", stats["hard_negative_score_histogram"], "Hard-negative scores", "score"),
    ]
    for filename, hist, title, xlabel in panels:
        if not hist:
            continue
        fig, ax = plt.subplots(figsize=(6, 4))
        labels = list(hist.keys())
        _bar(ax, labels, [hist[k] for k in labels], title, xlabel)
        fig.tight_layout()
        path = out / filename
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written


def render_correlation_figure(report: dict, out_dir: str | Path) -> list[Path]:
    """Grouped tau/rho bars for an evaluate report."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics = list(report["metrics"].keys())
    if not metrics:
        return []
    taus = [report["metrics"][m]["tau"] for m in metrics]
    rhos = [report["metrics"][m]["rho"] for m in metrics]

    fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(metrics)), 4))
    xs = range(len(metrics))
    width = 0.38
    ax.bar([x - width / 2 for x in xs], taus, width, label="Kendall tau-b", color="#4878a8")
    ax.bar([x + width / 2 for x in xs], rhos, width, label="Spearman rho", color="#e1812c")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(metrics, rotation=30, ha="right")
    ax.set_ylabel("correlation with human scores")
    ax.set_title(f"Segment-level correlations ({report['grouping']})")
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.legend()
    fig.tight_layout()
    path = out / "correlations.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [path]
