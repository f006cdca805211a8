"""Render feature tracks and evaluation results to PNG files."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_FEATURE_AXES = {
    "energy": ("energy", "frame energy"),
    "zcr": ("zcr", "zero crossings / frame"),
    "pitch": ("pitch_hz", "pitch (Hz)"),
}


def plot_feature_traces(labeled_tracks, label_set, feature, path, per_class=3):
    """Grid of per-frame traces: one row per class, a few signals per row."""
    attr, ylabel = _FEATURE_AXES[feature]
    rows = []
    for lab in label_set:
        picked = [t for l, t in labeled_tracks if l == lab][:per_class]
        rows.append(picked)
    cols = max(1, max(len(r) for r in rows))
    fig, axes = plt.subplots(len(label_set), cols,
                             figsize=(3.2 * cols, 1.9 * len(label_set)),
                             squeeze=False)
    for i, (lab, picked) in enumerate(zip(label_set, rows)):
        for j in range(cols):
            ax = axes[i][j]
            if j < len(picked):
                ax.plot(getattr(picked[j], attr), linewidth=0.8)
            else:
                ax.axis("off")
            if j == 0:
                ax.set_ylabel(lab)
    axes[0][0].set_title(ylabel, loc="left", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_confusion(matrix, path, title=""):
    """Annotated actual-by-predicted count grid."""
    counts = matrix.counts
    fig, ax = plt.subplots(figsize=(4.2, 3.6))
    im = ax.imshow(counts, cmap="Blues")
    ax.set_xticks(range(len(matrix.labels)), matrix.labels)
    ax.set_yticks(range(len(matrix.labels)), matrix.labels)
    ax.set_xlabel("predicted")
    ax.set_ylabel("actual")
    if title:
        ax.set_title(title, fontsize=10)
    threshold = counts.max() / 2 if counts.max() else 0
    for i in range(counts.shape[0]):
        for j in range(counts.shape[1]):
            color = "white" if counts[i, j] > threshold else "black"
            ax.text(j, i, str(int(counts[i, j])), ha="center", va="center",
                    color=color, fontsize=9)
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_fold_accuracies(report, path):
    accs = report.fold_accuracies
    fig, ax = plt.subplots(figsize=(4.8, 3.0))
    ax.bar(np.arange(1, len(accs) + 1), accs, color="#4878a8")
    ax.axhline(report.mean, color="crimson", linewidth=1,
               label=f"mean {report.mean:.2f}")
    ax.set_xlabel("fold")
    ax.set_ylabel("accuracy (%)")
    ax.set_ylim(0, 105)
    ax.set_title(report.classifier, fontsize=10)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_comparison(results, path):
    """Horizontal bars of mean accuracy with std whiskers, given order kept."""
    names = [rep.classifier for _, rep in results]
    means = [rep.mean for _, rep in results]
    stds = [rep.std for _, rep in results]
    y = np.arange(len(names))[::-1]
    fig, ax = plt.subplots(figsize=(5.6, 0.5 * len(names) + 1.2))
    ax.barh(y, means, xerr=stds, color="#4878a8", capsize=3)
    ax.set_yticks(y, names)
    ax.set_xlabel("accuracy (%)")
    ax.set_xlim(0, 105)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
