"""Module-level checks for bundles, embeddings, curves, and traceplots."""

import json

import numpy as np
import pandas as pd
import pytest
from sklearn.metrics import silhouette_score

from swarmtune_viz.bundle import PARAM_COLUMNS, BundleError, VizBundle
from swarmtune_viz.embedding import compute_embedding, embed_and_panel
from swarmtune_viz.traces import traceplots
from swarmtune_viz.training import training_figures


def synthetic_samples(n_per_cluster=40, seed=0) -> pd.DataFrame:
    """Two well-separated blobs in the 9-D parameter box."""
    rng = np.random.default_rng(seed)
    c1 = np.array([0.5, 0.5, 0.5, 0.5, 0.2, 0.2, 0.2, 0.2, 0.2])
    c2 = np.array([3.5, 3.5, 3.5, 3.5, 0.8, 0.8, 0.8, 0.8, 0.8])
    rows = np.vstack([c + rng.normal(0, 0.05, size=(n_per_cluster, 9))
                      for c in (c1, c2)])
    df = pd.DataFrame(rows, columns=PARAM_COLUMNS)
    df["y"] = np.concatenate([np.full(n_per_cluster, -0.2), np.full(n_per_cluster, -0.8)])
    df["post_mean"] = df["y"]
    df["post_var"] = 0.01
    return df


def write_bundle_dir(tmp_path, df) -> VizBundle:
    in_dir = tmp_path / "export"
    in_dir.mkdir()
    df.to_csv(in_dir / "samples.csv", index=False)
    return VizBundle(in_dir=in_dir, out_dir=tmp_path / "figs", seed=0, label="test")


class TestBundle:
    def test_missing_dir_rejected(self, tmp_path):
        with pytest.raises(BundleError):
            VizBundle(in_dir=tmp_path / "nope", out_dir=tmp_path)

    def test_missing_file_reported(self, tmp_path):
        d = tmp_path / "export"
        d.mkdir()
        bundle = VizBundle(in_dir=d, out_dir=tmp_path, label="x")
        with pytest.raises(BundleError, match="samples.csv"):
            bundle.samples()

    def test_reads_run_config(self, export_dir, tmp_path):
        bundle = VizBundle(in_dir=export_dir, out_dir=tmp_path)
        assert bundle.run_config().get("acq") in ("qei", "qnei", "random")
        assert set(bundle.maze_names()) == {"hairpin", "tunnel"}


class TestEmbedding:
    def test_two_clusters_separate(self):
        df = synthetic_samples()
        coords = compute_embedding(df[PARAM_COLUMNS].to_numpy(), 15, 0.1, seed=0)
        labels = np.array([0] * 40 + [1] * 40)
        assert silhouette_score(coords, labels) > 0.5

    def test_deterministic_for_fixed_seed(self):
        df = synthetic_samples()
        X = df[PARAM_COLUMNS].to_numpy()
        a = compute_embedding(X, 15, 0.1, seed=3)
        b = compute_embedding(X, 15, 0.1, seed=3)
        assert np.array_equal(a, b)

    def test_panel_outputs(self, tmp_path):
        bundle = write_bundle_dir(tmp_path, synthetic_samples())
        paths = embed_and_panel(bundle)
        names = {p.name for p in paths}
        assert names == {"embedding.png", "embedding_coords.csv"}
        coords = pd.read_csv(bundle.out_dir / "embedding_coords.csv")
        assert {"embed_x", "embed_y", "post_mean", *PARAM_COLUMNS} <= set(coords.columns)
        assert len(coords) == 80

    def test_too_few_rows_rejected(self, tmp_path):
        bundle = write_bundle_dir(tmp_path, synthetic_samples(n_per_cluster=4))
        with pytest.raises(ValueError, match="rows"):
            embed_and_panel(bundle)


class TestTraining:
    def test_single_run_figures(self, export_dir, tmp_path):
        bundle = VizBundle(in_dir=export_dir, out_dir=tmp_path / "figs")
        paths = training_figures(bundle)
        assert {p.name for p in paths} == {"convergence.png", "performance.png"}
        for p in paths:
            assert p.stat().st_size > 0

    def test_overlaid_runs(self, export_dir, tmp_path):
        b1 = VizBundle(in_dir=export_dir, out_dir=tmp_path / "figs", label="run-a")
        b2 = VizBundle(in_dir=export_dir, out_dir=tmp_path / "figs", label="run-b")
        paths = training_figures([b1, b2])
        assert (tmp_path / "figs" / "convergence.png").exists()
        assert len(paths) == 2


class TestTraceplots:
    def test_per_reward_outputs(self, export_dir, tmp_path):
        bundle = VizBundle(in_dir=export_dir, out_dir=tmp_path / "figs")
        paths = traceplots(bundle)
        summary = json.loads((tmp_path / "figs" / "trace_summary.json").read_text())
        assert set(summary) == {"hairpin", "tunnel"}
        assert len(summary["hairpin"]) == 5
        assert len(summary["tunnel"]) == 3
        for maze, rewards in summary.items():
            for rid, info in rewards.items():
                assert (tmp_path / "figs" / f"trace_{maze}_r{rid[1:]}.png").exists()
                if info["captured"]:
                    assert info["agents_before"] == info["agents_after"]
                    assert len(info["agents"]) >= 1

    def test_captured_agent_sets_match_counts(self, export_dir, tmp_path):
        bundle = VizBundle(in_dir=export_dir, out_dir=tmp_path / "figs")
        traceplots(bundle)
        summary = json.loads((tmp_path / "figs" / "trace_summary.json").read_text())
        for maze in summary:
            caps = bundle.captures(maze)
            for row in caps.itertuples():
                info = summary[maze][f"R{int(row.reward_id)}"]
                assert len(info["agents"]) == int(row.n_agents_in_radius)
