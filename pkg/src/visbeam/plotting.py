"""SVG figures for evaluation reports.

Output is byte-deterministic: the Agg backend is forced, the SVG id salt is
fixed and the date metadata is suppressed.
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_RC = {"svg.hashsalt": "visbeam", "svg.fonttype": "path"}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def scatter_figure(top1, gt, r2, path):
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.2, 4.0))
        ax.scatter(gt, top1, s=6)
        ax.plot([0, 1], [0, 1], lw=0.8, color="k")
        ax.set_xlim(0, 1.02)
        ax.set_ylim(0, 1.02)
        ax.set_xlabel("ground-truth power (normalized)")
        ax.set_ylabel("top-1 beam power (normalized)")
        if r2 is not None:
            ax.set_title(f"R2 = {r2:.3f}")
        fig.tight_layout()
        _save(fig, path)


def confusion_figure(counts, path):
    counts = np.asarray(counts, dtype=float)
    rows = counts.sum(axis=1, keepdims=True)
    norm = np.divide(counts, rows, out=np.zeros_like(counts), where=rows > 0)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.6, 4.0))
        im = ax.imshow(norm, origin="lower", cmap="viridis", vmin=0, vmax=1, interpolation="nearest")
        ax.set_xlabel("predicted beam")
        ax.set_ylabel("true beam")
        fig.colorbar(im, ax=ax, fraction=0.046)
        fig.tight_layout()
        _save(fig, path)


def curve_figure(curve, path):
    frac = [r[0] for r in curve]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.6, 3.4))
        ax.plot(frac, [r[2] for r in curve], marker="o", label="top-1")
        ax.plot(frac, [r[3] for r in curve], marker="s", label="top-5")
        ax.set_xlabel("fraction of training samples")
        ax.set_ylabel("validation accuracy")
        ax.set_ylim(0, 1.02)
        ax.legend(loc="lower right")
        fig.tight_layout()
        _save(fig, path)


def render_report(report, out_dir):
    """Write the report's figures to ``out_dir``; returns the file names."""
    names = []
    top1, gt = report.power_pairs
    if len(gt):
        scatter_figure(top1, gt, report.r2, os.path.join(out_dir, "scatter.svg"))
        names.append("scatter.svg")
    confusion_figure(report.confusion, os.path.join(out_dir, "confusion.svg"))
    names.append("confusion.svg")
    if report.curve:
        curve_figure(report.curve, os.path.join(out_dir, "curve.svg"))
        names.append("curve.svg")
    return names
