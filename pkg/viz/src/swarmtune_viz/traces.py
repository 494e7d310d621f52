"""Per-reward trajectory traceplots: goal-directed approach vs after-capture."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .bundle import VizBundle

APPROACH_COLOR = "tab:blue"
AFTER_COLOR = "tab:orange"


def _frames(traj) -> tuple[np.ndarray, np.ndarray]:
    """(F,) times and (F, N, 2) positions from the long-format trajectory."""
    times = np.sort(traj["t_s"].unique())
    n_agents = int(traj["agent_id"].max()) + 1
    pos = np.full((len(times), n_agents, 2), np.nan)
    t_index = {t: i for i, t in enumerate(times)}
    rows = traj.to_numpy()
    cols = {c: i for i, c in enumerate(traj.columns)}
    for r in rows:
        f = t_index[r[cols["t_s"]]]
        a = int(r[cols["agent_id"]])
        pos[f, a, 0] = r[cols["x"]]
        pos[f, a, 1] = r[cols["y"]]
    return times, pos


def _draw_maze(ax, maze: dict):
    x0, y0, x1, y1 = maze["bounds"]
    ax.set_xlim(x0, x1)
    ax.set_ylim(y0, y1)
    ax.set_aspect("equal")
    ax.set_xticks([])
    ax.set_yticks([])
    for (a, b) in maze["walls"]:
        ax.plot([a[0], b[0]], [a[1], b[1]], color="black", lw=2)
    rewards = np.asarray(maze["rewards"])
    ax.scatter(rewards[:, 0], rewards[:, 1], marker="*", s=160, color="gold",
               edgecolors="black", zorder=5)


def traceplots(bundle: VizBundle) -> list[Path]:
    """One figure per reward and maze: the contributing agents' paths up to
    capture (blue) beside the same agents afterwards (orange); uncaptured
    rewards get a single annotated panel. Also writes trace_summary.json
    recording the agent sets behind each panel pair."""
    bundle.out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    summary = {}
    for name in bundle.maze_names():
        maze = bundle.maze(name)
        times, pos = _frames(bundle.trajectory(name))
        caps = bundle.captures(name)
        cap_by_reward = {int(r.reward_id): (float(r.t_s), int(r.n_agents_in_radius))
                         for r in caps.itertuples()}
        rewards = np.asarray(maze["rewards"])
        summary[name] = {}
        for k in range(1, len(rewards) + 1):
            fig_path = bundle.out_dir / f"trace_{name}_r{k}.png"
            if k not in cap_by_reward:
                fig, ax = plt.subplots(figsize=(5, 5))
                _draw_maze(ax, maze)
                ax.scatter(*rewards[k - 1], marker="*", s=260, color="red",
                           edgecolors="black", zorder=6)
                ax.set_title(f"{name} R{k}: not captured")
                fig.tight_layout()
                fig.savefig(fig_path, dpi=110)
                plt.close(fig)
                summary[name][f"R{k}"] = {"captured": False, "agents": []}
                written.append(fig_path)
                continue

            t_cap, n_in = cap_by_reward[k]
            f_cap = int(np.searchsorted(times, t_cap + 1e-9) - 1)
            f_cap = max(f_cap, 0)
            d = np.linalg.norm(pos[f_cap] - rewards[k - 1], axis=1)
            agents = np.argsort(d)[:n_in]

            fig, (ax_b, ax_a) = plt.subplots(1, 2, figsize=(10, 5))
            for ax, frame_slice, color, label in (
                    (ax_b, slice(0, f_cap + 1), APPROACH_COLOR, f"capture t <= {t_cap:.2f}s"),
                    (ax_a, slice(f_cap, None), AFTER_COLOR, f"after t > {t_cap:.2f}s")):
                _draw_maze(ax, maze)
                ax.scatter(*rewards[k - 1], marker="*", s=260, color="red",
                           edgecolors="black", zorder=6)
                for a in agents:
                    ax.plot(pos[frame_slice, a, 0], pos[frame_slice, a, 1],
                            color=color, lw=0.7, alpha=0.7)
                ax.set_title(f"{name} R{k}: {label}")
            fig.tight_layout()
            fig.savefig(fig_path, dpi=110)
            plt.close(fig)
            summary[name][f"R{k}"] = {
                "captured": True, "t_s": t_cap,
                "agents": sorted(int(a) for a in agents),
                "agents_before": sorted(int(a) for a in agents),
                "agents_after": sorted(int(a) for a in agents),
            }
            written.append(fig_path)
    summary_path = bundle.out_dir / "trace_summary.json"
    summary_path.write_text(json.dumps(summary, indent=1))
    written.append(summary_path)
    return written
