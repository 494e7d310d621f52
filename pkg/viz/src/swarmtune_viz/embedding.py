"""2D embedding of the 9-D parameter space, one panel per coloring."""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .bundle import PARAM_COLUMNS, VizBundle

MIN_ROWS = 10


def compute_embedding(X: np.ndarray, neighbors: int, min_dist: float, seed: int) -> np.ndarray:
    """Nonlinear 2D embedding of standardized parameter rows.

    Uses UMAP when installed; otherwise falls back to t-SNE, mapping the
    neighbor count onto the perplexity (min_dist has no t-SNE analogue).
    Deterministic for a fixed seed either way.
    """
    mu = X.mean(axis=0)
    sd = np.where(X.std(axis=0) > 1e-12, X.std(axis=0), 1.0)
    Z = (X - mu) / sd
    try:
        from umap import UMAP
        reducer = UMAP(n_components=2, n_neighbors=neighbors, min_dist=min_dist,
                       random_state=seed)
        return np.asarray(reducer.fit_transform(Z), dtype=float)
    except ImportError:
        from sklearn.manifold import TSNE
        perplexity = max(2.0, min(float(neighbors), (len(Z) - 1) / 3.0))
        reducer = TSNE(n_components=2, perplexity=perplexity, init="pca",
                       random_state=seed)
        return np.asarray(reducer.fit_transform(Z), dtype=float)


def embed_and_panel(bundle: VizBundle) -> list[Path]:
    """Shared-coordinate scatter panels: posterior mean plus each parameter.

    Writes the 10-panel figure and a coordinates table so downstream
    checks can verify reproducibility without parsing the image.
    """
    df = bundle.samples()
    if len(df) < MIN_ROWS:
        raise ValueError(f"samples.csv has {len(df)} rows; need >= {MIN_ROWS}")
    X = df[PARAM_COLUMNS].to_numpy()
    coords = compute_embedding(X, bundle.neighbors, bundle.min_dist, bundle.seed)

    bundle.out_dir.mkdir(parents=True, exist_ok=True)
    fig, axes = plt.subplots(2, 5, figsize=(22, 8))
    panels = [("post_mean", "posterior mean")] + [(c, c) for c in PARAM_COLUMNS]
    for ax, (col, title) in zip(axes.ravel(), panels):
        sc = ax.scatter(coords[:, 0], coords[:, 1], c=df[col], s=14, cmap="viridis")
        ax.set_title(title)
        ax.set_xticks([])
        ax.set_yticks([])
        fig.colorbar(sc, ax=ax, shrink=0.8)
    fig.suptitle(f"parameter space ({bundle.label})")
    fig.tight_layout()
    fig_path = bundle.out_dir / "embedding.png"
    fig.savefig(fig_path, dpi=110)
    plt.close(fig)

    coords_path = bundle.out_dir / "embedding_coords.csv"
    out = df.copy()
    out.insert(0, "embed_y", coords[:, 1])
    out.insert(0, "embed_x", coords[:, 0])
    out.to_csv(coords_path, index=False)
    return [fig_path, coords_path]
