"""Figures written next to the CSV reports.

All figures go through ``_save`` which strips the PNG software tag so that
identical inputs produce byte-identical files.
"""

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import METRIC_NAMES  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.4,
    "savefig.dpi": 120,
}

COLORS = {0: "#3b75af", 1: "#ef8636"}  # real, fake


def _figure(width=6.0, height=None, **kw):
    golden = (math.sqrt(5) - 1.0) / 2.0
    return plt.subplots(figsize=(width, height or width * golden), **kw)


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)


def plot_history(history, path):
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = _figure(7.0, 3.0, ncols=2)
        epochs = np.arange(1, len(history) + 1)
        for name, label in (("l_total", "total"), ("l_rec", "reconstruction"),
                            ("l_d", "cross-entropy"), ("l_mi", "contrastive")):
            vals = np.asarray(getattr(history, name), dtype=float)
            if np.all(np.isfinite(vals)) and np.any(vals > 0):
                ax1.plot(epochs, vals, label=label)
        ax1.set_yscale("symlog", linthresh=1e-3)
        ax1.set_xlabel("epoch")
        ax1.set_ylabel("loss")
        ax1.legend(frameon=False)
        ax2.plot(epochs, history.val_acc, color="k")
        ax2.set_ylim(0, 1.02)
        ax2.set_xlabel("epoch")
        ax2.set_ylabel("validation accuracy")
        _save(fig, path)


def plot_ablation(reports: dict, path):
    with plt.rc_context(STYLE):
        fig, ax = _figure(6.5)
        labels = list(reports)
        width = 0.8 / len(METRIC_NAMES)
        x = np.arange(len(labels))
        for k, name in enumerate(METRIC_NAMES):
            means = [reports[v].mean(name) for v in labels]
            stds = [reports[v].std(name) for v in labels]
            ax.bar(x + (k - 1.5) * width, means, width, yerr=stds, capsize=2, label=name)
        ax.set_xticks(x)
        ax.set_xticklabels(labels)
        ax.set_ylim(0, 1.05)
        ax.set_ylabel("score (mean ± std over folds)")
        ax.legend(frameon=False, ncol=4, loc="lower center")
        _save(fig, path)


def plot_early_detection(result, path, cutoff_labels):
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = _figure(7.0, 3.0, ncols=2)
        x = np.arange(len(cutoff_labels))
        ax1.plot(x, result.accuracy, marker="o", color="k", label="windowed")
        ax1.axhline(result.full_accuracy, ls="--", color="0.5", label="all participants")
        ax1.set_xticks(x)
        ax1.set_xticklabels(cutoff_labels)
        ax1.set_ylim(0, 1.02)
        ax1.set_xlabel("time since publication")
        ax1.set_ylabel("test accuracy")
        ax1.legend(frameon=False, loc="lower right")
        real = [p[0] for p in result.participants_by_class]
        fake = [p[1] for p in result.participants_by_class]
        ax2.plot(x, real, marker="o", color=COLORS[0], label="real")
        ax2.plot(x, fake, marker="s", color=COLORS[1], label="fake")
        ax2.set_xticks(x)
        ax2.set_xticklabels(cutoff_labels)
        ax2.set_xlabel("time since publication")
        ax2.set_ylabel("mean participants per item")
        ax2.legend(frameon=False)
        _save(fig, path)


def plot_case_study(stats: dict, path):
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = _figure(6.0, 2.8, ncols=2)
        classes = [c for c in (0, 1) if c in stats]
        names = ["real" if c == 0 else "fake" for c in classes]
        colors = [COLORS[c] for c in classes]
        ax1.bar(names, [stats[c].mean_users_per_edge for c in classes], color=colors)
        ax1.set_ylabel("mean users per item")
        ax2.bar(names, [stats[c].projection_density for c in classes], color=colors)
        ax2.set_ylabel("co-participation density")
        _save(fig, path)
