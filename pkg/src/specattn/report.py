"""Render figures from run artifacts.

Takes the delimited/JSON outputs a run directory already contains (history,
segment-count search, noise sweep, mask export) and writes PNG figures next
to them. Purely a presentation layer: nothing here feeds back into training
or evaluation.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _read_csv(path: Path) -> dict[str, list[float]]:
    with path.open() as fh:
        reader = csv.DictReader(fh)
        columns: dict[str, list[float]] = {name: [] for name in reader.fieldnames}
        for row in reader:
            for name, value in row.items():
                columns[name].append(float(value))
    return columns


def render_history(history_csv, out_png) -> Path:
    """Loss and accuracy curves over epochs, train vs validation."""
    cols = _read_csv(Path(history_csv))
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(10, 4))
    ax_loss.plot(cols["epoch"], cols["train_loss"], label="train")
    ax_loss.plot(cols["epoch"], cols["val_loss"], label="validation")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("loss")
    ax_loss.legend()
    ax_loss.grid(True, alpha=0.3)
    ax_acc.plot(cols["epoch"], cols["train_acc"], label="train")
    ax_acc.plot(cols["epoch"], cols["val_acc"], label="validation")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("accuracy")
    ax_acc.legend()
    ax_acc.grid(True, alpha=0.3)
    fig.tight_layout()
    out = Path(out_png)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def render_masks(mask_json, out_png) -> Path:
    """Learned mask weights per frequency bin, one panel per segment."""
    doc = json.loads(Path(mask_json).read_text())
    masks = doc["masks"]
    k = len(masks)
    fig, axes = plt.subplots(k, 1, figsize=(8, 2.2 * k), squeeze=False)
    for i, (ax, mask) in enumerate(zip(axes[:, 0], masks)):
        markerline, stemlines, _ = ax.stem(range(len(mask)), mask)
        plt.setp(markerline, markersize=3)
        plt.setp(stemlines, linewidth=0.8)
        ax.set_ylabel(f"segment {i}")
        ax.grid(True, alpha=0.3)
    axes[-1, 0].set_xlabel("frequency bin")
    fig.suptitle("learned mask weights")
    fig.tight_layout()
    out = Path(out_png)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def render_noise_sweep(noise_csv, out_png) -> Path:
    """Accuracy as a function of injected-noise intensity."""
    cols = _read_csv(Path(noise_csv))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(cols["sigma_rel"], cols["accuracy"], marker="o")
    ax.set_xlabel("relative noise level")
    ax.set_ylabel("test accuracy")
    ax.set_ylim(0, 1.02)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    out = Path(out_png)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def render_ksearch(ksearch_csv, out_png) -> Path:
    """Validation loss per candidate segment count; the pick is highlighted."""
    cols = _read_csv(Path(ksearch_csv))
    fig, ax = plt.subplots(figsize=(6, 4))
    colors = ["tab:red" if sel else "tab:blue" for sel in cols["selected"]]
    ax.bar([int(k) for k in cols["K"]], cols["val_loss"], color=colors)
    ax.set_xlabel("segment count")
    ax.set_ylabel("validation loss (short run)")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    out = Path(out_png)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def render_run(run_dir) -> list[Path]:
    """Render every figure the run directory has inputs for."""
    run_dir = Path(run_dir)
    sources = [
        ("history.csv", "convergence.png", render_history),
        ("mask.json", "masks.png", render_masks),
        ("noise_sweep.csv", "noise_sweep.png", render_noise_sweep),
        ("ksearch.csv", "ksearch.png", render_ksearch),
    ]
    written = []
    for src, dst, renderer in sources:
        src_path = run_dir / src
        if src_path.exists():
            written.append(renderer(src_path, run_dir / dst))
    return written
