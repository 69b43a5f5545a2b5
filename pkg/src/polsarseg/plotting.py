"""Report figures rendered off-screen to PNG files.

Figures carry no software or timestamp metadata, so repeated runs write
identical bytes.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_SAVE = {"dpi": 100, "metadata": {"Software": None}}


def _save(fig, path):
    fig.savefig(path, format="png", **_SAVE)
    plt.close(fig)


def plot_legend(doc, path):
    """One colored row per class with its name and tier."""
    classes = doc["classes"]
    fig, ax = plt.subplots(figsize=(4.0, 0.3 * len(classes) + 0.6))
    for row, c in enumerate(classes):
        y = len(classes) - 1 - row
        ax.add_patch(plt.Rectangle((0, y), 1, 0.8, color=np.asarray(c["rgb"]) / 255.0))
        ax.text(1.2, y + 0.4, c["name"], va="center", fontsize=8)
    ax.set_xlim(0, 6)
    ax.set_ylim(-0.2, len(classes))
    ax.axis("off")
    ax.set_title("MVD classes", fontsize=9)
    _save(fig, path)


def plot_iou_bars(doc, path):
    names = [c["name"] for c in doc["classes"]]
    iou = [np.nan if c["iou"] is None else 100.0 * c["iou"] for c in doc["classes"]]
    fig, ax = plt.subplots(figsize=(max(4.0, 0.5 * len(names) + 1.5), 3.0))
    ax.bar(np.arange(len(names)), iou, color="#4a78b0")
    ax.set_xticks(np.arange(len(names)))
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=7)
    ax.set_ylim(0, 100)
    ax.set_ylabel("IoU (%)")
    miou = doc.get("mIoU")
    if miou is not None:
        ax.axhline(100.0 * miou, color="k", lw=0.8, ls="--")
        ax.set_title(f"mIoU {100.0 * miou:.2f}%", fontsize=9)
    fig.tight_layout()
    _save(fig, path)


def plot_h_alpha(entropy, alpha, valid, path, bins=64):
    """2-D histogram of valid pixels on the entropy/alpha plane with the
    zone boundaries drawn in."""
    fig, ax = plt.subplots(figsize=(4.0, 3.2))
    h = np.asarray(entropy)[valid]
    a = np.asarray(alpha)[valid]
    counts, _, _ = np.histogram2d(h, a, bins=bins, range=[[0, 1], [0, 90]])
    ax.imshow(np.log1p(counts.T), origin="lower", extent=[0, 1, 0, 90], aspect="auto",
              cmap="viridis")
    for x in (0.5, 0.9):
        ax.axvline(x, color="w", lw=0.6)
    for x0, x1, ys in ((0, 0.5, (42.5, 47.5)), (0.5, 0.9, (40, 50)), (0.9, 1.0, (55,))):
        for y in ys:
            ax.plot([x0, x1], [y, y], color="w", lw=0.6)
    ax.set_xlabel("entropy")
    ax.set_ylabel("alpha (deg)")
    fig.tight_layout()
    _save(fig, path)


def plot_objective(history, path):
    fig, ax = plt.subplots(figsize=(4.0, 2.6))
    ax.plot(np.arange(len(history)), history, marker="o", ms=3)
    ax.set_xlabel("iteration")
    ax.set_ylabel("Wishart objective")
    fig.tight_layout()
    _save(fig, path)


def plot_prompt_maps(v_d, v_sd, path):
    """Dense-prompt map followed by the class-aware maps, one panel each."""
    n = 1 + len(v_sd)
    fig, axes = plt.subplots(1, n, figsize=(1.6 * n, 1.9))
    for ax, img, title in zip(axes, [v_d, *v_sd], ["V_D"] + [f"V_SD {i}" for i in range(len(v_sd))]):
        ax.imshow(img, cmap="magma", vmin=0.0, vmax=1.0)
        ax.set_title(title, fontsize=7)
        ax.axis("off")
    fig.tight_layout()
    _save(fig, path)
