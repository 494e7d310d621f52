"""Training-progress figures: convergence curves, histograms, best-observed."""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .bundle import VizBundle


def training_figures(bundles: list[VizBundle] | VizBundle) -> list[Path]:
    """Convergence and performance curves, overlaid across runs when several
    bundles are given. Output lands in the first bundle's out_dir."""
    if isinstance(bundles, VizBundle):
        bundles = [bundles]
    out_dir = bundles[0].out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    fig, (ax_d, ax_v) = plt.subplots(1, 2, figsize=(11, 4))
    for b in bundles:
        m = b.metrics()
        ax_d.plot(m["epoch"], m["dissimilarity"], marker="o", ms=3, label=b.label)
        ax_v.plot(m["epoch"], m["max_post_var"], marker="o", ms=3, label=b.label)
    ax_d.set_xlabel("epoch")
    ax_d.set_ylabel("dissimilarity")
    ax_v.set_xlabel("epoch")
    ax_v.set_ylabel("max posterior variance")
    ax_d.legend()
    fig.tight_layout()
    path = out_dir / "convergence.png"
    fig.savefig(path, dpi=110)
    plt.close(fig)
    written.append(path)

    fig, (ax_h, ax_b) = plt.subplots(1, 2, figsize=(11, 4))
    for b in bundles:
        h = b.histogram()
        centers = 0.5 * (h["bin_left"] + h["bin_right"])
        width = (h["bin_right"] - h["bin_left"]).iloc[0]
        ax_h.bar(centers, h["count"], width=width * 0.9, alpha=0.55, label=b.label)
        t = b.best_observed()
        ax_b.plot(t["trial"], t["best_y"], label=b.label)
    ax_h.set_xlabel("observed objective")
    ax_h.set_ylabel("trials")
    ax_b.set_xlabel("trial")
    ax_b.set_ylabel("best observed")
    ax_h.legend()
    ax_b.legend()
    fig.tight_layout()
    path = out_dir / "performance.png"
    fig.savefig(path, dpi=110)
    plt.close(fig)
    written.append(path)
    return written
