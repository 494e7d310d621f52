"""End-to-end optimization loop, run persistence, and analysis exports.

A run evaluates an initial block of uniform-random parameter sets, then
alternates: fit the surrogate on everything seen, propose a candidate
batch with the configured acquisition, simulate the batch on both mazes,
append, and record convergence metrics. The record is a JSON-Lines file
flushed as results arrive, so an interrupted campaign resumes and
reproduces the uninterrupted run bit-for-bit (wall-clock timings aside).
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .acquisition import AcqConfig, optimize_batch
from .controller import run_episode
from .convergence import batch_dissimilarity, max_posterior_variance
from .env import MazeSpec, builtin_mazes, load_maze
from .gp import Dataset, GPHyperparams, GPModel, build_model, fit, posterior, save_model
from .objective import episode_loss
from .params import PARAM_BOUNDS, PARAM_NAMES, ParamVector, SwarmConstants
from .seeding import derive_seed

RECORD_NAME = "record.jsonl"
HIST_BINS = 20


@dataclass(frozen=True)
class RunConfig:
    acq: str = "qei"
    n_init: int = 24
    n_epochs: int = 30
    q: int = 3
    n_mc: int = 512
    n_raw: int = 256
    n_starts: int = 8
    refine_maxiter: int = 60
    gp_restarts: int = 8
    cutoff_s: float = 120.0
    seed: int = 0
    maze_dir: str | None = None
    out_dir: str = "runs/out"
    workers: int = 1
    consts: SwarmConstants = field(default_factory=SwarmConstants)

    def __post_init__(self):
        if self.n_init < 2:
            raise ValueError("n_init must be >= 2")
        if self.n_epochs < 1:
            raise ValueError("n_epochs must be >= 1")
        if self.cutoff_s > self.consts.duration:
            raise ValueError("cutoff_s exceeds episode duration")

    def mazes(self) -> tuple[MazeSpec, ...]:
        if self.maze_dir is None:
            return builtin_mazes()
        paths = sorted(Path(self.maze_dir).glob("*.json"))
        if not paths:
            raise FileNotFoundError(f"no maze files in {self.maze_dir}")
        return tuple(load_maze(p) for p in paths)

    def to_dict(self, maze_names) -> dict:
        doc = asdict(self)
        doc["consts"] = asdict(self.consts)
        doc["mazes"] = list(maze_names)
        return doc


@dataclass(frozen=True)
class TrialEntry:
    index: int
    epoch: int               # 0 for the initial block
    params: np.ndarray       # (9,) raw units
    losses: tuple            # per-maze losses
    y: float
    wall_time_s: float


@dataclass(frozen=True)
class EpochEntry:
    epoch: int
    hyper: dict
    epoch_post_var: float    # this epoch's peak predictive variance (raw units)
    max_post_var: float      # running maximum across epochs
    dissimilarity: float
    best_observed: float
    acq_value: float | None


class RunRecord:
    """Append-only trial/epoch log bound to a JSONL file."""

    def __init__(self, path, config: dict):
        self.path = Path(path)
        self.config = config
        self.trials: list[TrialEntry] = []
        self.epochs: list[EpochEntry] = []

    @classmethod
    def create(cls, path, config: dict) -> "RunRecord":
        rec = cls(path, config)
        rec.path.parent.mkdir(parents=True, exist_ok=True)
        with open(rec.path, "w") as fh:
            fh.write(json.dumps({"type": "config", **config}) + "\n")
        return rec

    @classmethod
    def load(cls, path, repair: bool = False) -> "RunRecord":
        path = Path(path)
        config = None
        trials, epochs = [], []
        text = path.read_text()
        lines = text.splitlines()
        for i, line in enumerate(lines):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError:
                if i == len(lines) - 1:
                    # torn final line from an interrupted write; drop it so
                    # resumed appends start on a clean boundary
                    if repair:
                        keep = "".join(l + "\n" for l in lines[:-1])
                        path.write_text(keep)
                    break
                raise
            kind = doc.pop("type")
            if kind == "config":
                config = doc
            elif kind == "trial":
                trials.append(TrialEntry(
                    index=doc["index"], epoch=doc["epoch"],
                    params=np.array(doc["params"]),
                    losses=tuple(doc["losses"]), y=doc["y"],
                    wall_time_s=doc["wall_time_s"],
                ))
            elif kind == "epoch":
                epochs.append(EpochEntry(
                    epoch=doc["epoch"],
                    hyper=doc["hyper"],
                    epoch_post_var=doc["epoch_post_var"],
                    max_post_var=doc["max_post_var"],
                    dissimilarity=doc["dissimilarity"],
                    best_observed=doc["best_observed"],
                    acq_value=doc["acq_value"],
                ))
        if config is None:
            raise ValueError(f"{path}: missing config line")
        rec = cls(path, config)
        rec.trials, rec.epochs = trials, epochs
        return rec

    def append_trial(self, entry: TrialEntry) -> None:
        self.trials.append(entry)
        with open(self.path, "a") as fh:
            fh.write(json.dumps({
                "type": "trial", "index": entry.index, "epoch": entry.epoch,
                "params": list(map(float, entry.params)),
                "losses": list(map(float, entry.losses)),
                "y": entry.y, "wall_time_s": entry.wall_time_s,
            }) + "\n")

    def append_epoch(self, entry: EpochEntry) -> None:
        self.epochs.append(entry)
        with open(self.path, "a") as fh:
            fh.write(json.dumps({
                "type": "epoch", "epoch": entry.epoch, "hyper": entry.hyper,
                "epoch_post_var": entry.epoch_post_var,
                "max_post_var": entry.max_post_var,
                "dissimilarity": entry.dissimilarity,
                "best_observed": entry.best_observed,
                "acq_value": entry.acq_value,
            }) + "\n")

    def params_matrix(self, upto: int | None = None) -> np.ndarray:
        trials = self.trials if upto is None else self.trials[:upto]
        return np.array([t.params for t in trials])

    def y_vector(self, upto: int | None = None) -> np.ndarray:
        trials = self.trials if upto is None else self.trials[:upto]
        return np.array([t.y for t in trials])

    def fingerprint(self) -> tuple:
        """Deterministic content; excludes wall-clock timings."""
        return (
            tuple((t.index, t.epoch, tuple(t.params), t.losses, t.y) for t in self.trials),
            tuple((e.epoch, json.dumps(e.hyper, sort_keys=True), e.epoch_post_var,
                   e.max_post_var, e.dissimilarity, e.best_observed)
                  for e in self.epochs),
        )


def _simulate_trial(params_arr, consts: SwarmConstants, maze_specs, trial_seed: int,
                    cutoff_s: float):
    """Top-level worker: evaluate one parameter set on every maze."""
    params = ParamVector.from_array(params_arr)
    losses = []
    for maze in maze_specs:
        res = run_episode(maze, params, consts, derive_seed(trial_seed, maze.name),
                          cutoff_s=cutoff_s)
        losses.append(episode_loss(res, res.n_t, maze.n_rewards))
    return tuple(losses), float(np.mean(losses))


def _hyper_to_dict(h: GPHyperparams) -> dict:
    return {
        "mean_const": h.mean_const, "output_scale": h.output_scale,
        "length_scales": list(map(float, h.length_scales)), "noise_var": h.noise_var,
    }


def _hyper_from_dict(doc: dict) -> GPHyperparams:
    return GPHyperparams(
        mean_const=doc["mean_const"], output_scale=doc["output_scale"],
        length_scales=np.array(doc["length_scales"]), noise_var=doc["noise_var"],
    )


def run_bo(cfg: RunConfig, objective=None) -> RunRecord:
    """Run (or resume) the full optimization campaign.

    `objective(params, trial_seed) -> (losses, y)` replaces the simulator
    when given, e.g. for synthetic benchmark functions. Fully
    deterministic given (cfg, seed); an existing record at the output
    path is resumed, not overwritten.
    """
    out = Path(cfg.out_dir)
    record_path = out / RECORD_NAME
    mazes = cfg.mazes() if objective is None else ()
    maze_names = [m.name for m in mazes] if objective is None else ["custom"]
    config_doc = cfg.to_dict(maze_names)

    if record_path.exists():
        record = RunRecord.load(record_path, repair=True)
        stored = {k: v for k, v in record.config.items() if k not in ("out_dir", "workers")}
        fresh = {k: v for k, v in config_doc.items() if k not in ("out_dir", "workers")}
        if stored != fresh:
            raise ValueError(f"{record_path}: existing record was produced by a different config")
    else:
        record = RunRecord.create(record_path, config_doc)

    if objective is None:
        def objective(params, trial_seed):
            return _simulate_trial(params.to_array(), cfg.consts, mazes, trial_seed, cfg.cutoff_s)

    def evaluate_many(points, indices, epoch):
        todo = [(i, p) for i, p in zip(indices, points) if i >= len(record.trials)]
        if not todo:
            return
        t0 = time.perf_counter()
        results = []
        for i, p in todo:
            results.append(objective(ParamVector.from_array(p), derive_seed(cfg.seed, "trial", i)))
        per = (time.perf_counter() - t0) / len(todo)
        for (i, p), (losses, y) in zip(todo, results):
            record.append_trial(TrialEntry(index=i, epoch=epoch, params=np.asarray(p, float),
                                           losses=losses, y=y, wall_time_s=per))

    def evaluate_many_parallel(points, indices, epoch):
        todo = [(i, p) for i, p in zip(indices, points) if i >= len(record.trials)]
        if not todo:
            return
        t0 = time.perf_counter()
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futs = [pool.submit(_simulate_trial, np.asarray(p, float), cfg.consts, mazes,
                                derive_seed(cfg.seed, "trial", i), cfg.cutoff_s)
                    for i, p in todo]
            results = [f.result() for f in futs]
        per = (time.perf_counter() - t0) / len(todo)
        for (i, p), (losses, y) in zip(todo, results):
            record.append_trial(TrialEntry(index=i, epoch=epoch, params=np.asarray(p, float),
                                           losses=losses, y=y, wall_time_s=per))

    runner = evaluate_many_parallel if (cfg.workers > 1 and mazes) else evaluate_many

    # initial block: uniform in the search box, all generated upfront so a
    # resumed run sees the same points regardless of where it stopped
    rng = np.random.default_rng(derive_seed(cfg.seed, "init"))
    lo, hi = PARAM_BOUNDS[:, 0], PARAM_BOUNDS[:, 1]
    init_points = rng.uniform(lo, hi, size=(cfg.n_init, len(PARAM_NAMES)))
    runner(init_points, list(range(cfg.n_init)), epoch=0)

    done_epochs = {e.epoch for e in record.epochs}
    for e in range(1, cfg.n_epochs + 1):
        n_before = cfg.n_init + (e - 1) * cfg.q
        if e in done_epochs:
            continue
        X = record.params_matrix(upto=n_before)
        Y = record.y_vector(upto=n_before)
        data = Dataset(X=X, Y=Y, bounds=PARAM_BOUNDS)
        model = fit(data, seed=derive_seed(cfg.seed, "fit", e), n_restarts=cfg.gp_restarts)
        acq_cfg = AcqConfig(kind=cfg.acq, n_mc=cfg.n_mc, q=cfg.q, n_raw=cfg.n_raw,
                            n_starts=cfg.n_starts, refine_maxiter=cfg.refine_maxiter,
                            seed=derive_seed(cfg.seed, "acq", e))
        batch = optimize_batch(model, data, PARAM_BOUNDS, acq_cfg)

        post = posterior(model, batch.points)
        epoch_var = float(np.max(post.var_raw))
        prior_vars = [x.epoch_post_var for x in record.epochs if x.epoch < e]
        run_max = max_posterior_variance(prior_vars + [epoch_var])
        dissim = batch_dissimilarity(X, batch.points)

        indices = list(range(n_before, n_before + cfg.q))
        runner(batch.points, indices, epoch=e)

        record.append_epoch(EpochEntry(
            epoch=e, hyper=_hyper_to_dict(model.hyper),
            epoch_post_var=epoch_var, max_post_var=run_max,
            dissimilarity=dissim,
            best_observed=float(record.y_vector().max()),
            acq_value=batch.acq_value,
        ))
    return record


def best_observed_trace(record: RunRecord) -> np.ndarray:
    """Running maximum of the combined objective over trials."""
    y = record.y_vector()
    if len(y) == 0:
        raise ValueError("record has no trials")
    return np.maximum.accumulate(y)


def incumbent(record: RunRecord) -> TrialEntry:
    y = record.y_vector()
    if len(y) == 0:
        raise ValueError("record has no trials")
    return record.trials[int(np.argmax(y))]


def model_from_record(record: RunRecord) -> GPModel:
    """Rebuild the final surrogate exactly from the recorded state."""
    if len(record.trials) < 2:
        raise ValueError("record has too few trials to build a model")
    data = Dataset(X=record.params_matrix(), Y=record.y_vector(), bounds=PARAM_BOUNDS)
    if record.epochs:
        return build_model(data, _hyper_from_dict(record.epochs[-1].hyper))
    return fit(data, seed=derive_seed(int(record.config.get("seed", 0)), "fit", 0))


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def anticipate(model: GPModel, cfg: RunConfig, n_samples: int,
               out_path=None) -> np.ndarray:
    """Score acquisition-proposed (not uniform) points under the posterior.

    Returns an (n_samples, d+2) array of parameters, posterior mean, and
    posterior variance; no simulation is performed.
    """
    if model is None:
        raise ValueError("a fitted model is required")
    kind = cfg.acq if cfg.acq in ("qei", "qnei") else "qei"
    rows = []
    batch_idx = 0
    while len(rows) < n_samples:
        acq_b = AcqConfig(kind=kind, n_mc=cfg.n_mc, q=cfg.q, n_raw=cfg.n_raw,
                          n_starts=cfg.n_starts, refine_maxiter=cfg.refine_maxiter,
                          seed=derive_seed(cfg.seed, "anticipate", batch_idx))
        batch = optimize_batch(model, model.data, model.data.bounds, acq_b)
        for p in batch.points:
            if len(rows) < n_samples:
                rows.append(p)
        batch_idx += 1
    pts = np.array(rows)
    post_mean = np.empty(n_samples)
    post_var = np.empty(n_samples)
    for i in range(0, n_samples, 64):   # chunked; only the diagonal is needed
        sl = slice(i, min(i + 64, n_samples))
        post = posterior(model, pts[sl])
        post_mean[sl] = post.mean_raw
        post_var[sl] = post.var_raw
    table = np.column_stack([pts, post_mean, post_var])
    if out_path is not None:
        _write_csv(Path(out_path), list(PARAM_NAMES) + ["post_mean", "post_var"], table)
    return table


def replay(params: ParamVector, maze: MazeSpec, consts: SwarmConstants, seed,
           out_dir, cutoff_s: float | None = None, prefix: str = "",
           traj_decimation: int = 10):
    """Single-maze episode with full trajectory and capture logging."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cutoff = consts.duration if cutoff_s is None else cutoff_s
    res = run_episode(maze, params, consts, seed, cutoff_s=cutoff,
                      store_trajectory=True, traj_decimation=traj_decimation)
    traj_rows = []
    for f, t in enumerate(res.traj_steps):
        t_s = t * consts.dt
        for a in range(res.traj_pos.shape[1]):
            traj_rows.append((t_s, a, res.traj_pos[f, a, 0], res.traj_pos[f, a, 1]))
    _write_csv(out / f"{prefix}trajectory.csv", ["t_s", "agent_id", "x", "y"], traj_rows)
    cap_rows = [(k + 1, s * consts.dt, res.capture_counts[k])
                for k, s in enumerate(res.capture_steps) if s is not None]
    _write_csv(out / f"{prefix}captures.csv", ["reward_id", "t_s", "n_agents_in_radius"], cap_rows)
    maze_doc = {
        "name": maze.name, "bounds": list(maze.bounds),
        "walls": maze.walls.tolist(), "rewards": maze.rewards.tolist(),
        "spawn": {"type": maze.spawn.kind, **({"rect": list(maze.spawn.rect)}
                                              if maze.spawn.rect else {})},
        "notes": maze.notes,
    }
    (out / f"{prefix}maze.json").write_text(json.dumps(maze_doc, indent=1))
    return res


def export_viz(record: RunRecord, model: GPModel, out_dir) -> list[Path]:
    """Write every analysis artifact the visualization layer consumes."""
    if not record.trials:
        raise ValueError("record has no trials to export")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    X = record.params_matrix()
    Y = record.y_vector()
    post_mean = np.empty(len(X))
    post_var = np.empty(len(X))
    for i in range(0, len(X), 64):
        sl = slice(i, min(i + 64, len(X)))
        post = posterior(model, X[sl])
        post_mean[sl] = post.mean_raw
        post_var[sl] = post.var_raw
    maze_names = record.config.get("mazes", ["hairpin", "tunnel"])
    loss_cols = [f"l_{name}" for name in maze_names]
    header = list(PARAM_NAMES) + loss_cols + ["y", "post_mean", "post_var"]
    rows = [list(t.params) + list(t.losses) + [t.y, post_mean[i], post_var[i]]
            for i, t in enumerate(record.trials)]
    _write_csv(out / "samples.csv", header, rows)
    written.append(out / "samples.csv")

    _write_csv(out / "metrics.csv",
               ["epoch", "epoch_post_var", "max_post_var", "dissimilarity", "best_observed"],
               [(e.epoch, e.epoch_post_var, e.max_post_var, e.dissimilarity, e.best_observed)
                for e in record.epochs])
    written.append(out / "metrics.csv")

    trace = best_observed_trace(record)
    _write_csv(out / "best_observed.csv", ["trial", "y", "best_y"],
               [(i, Y[i], trace[i]) for i in range(len(Y))])
    written.append(out / "best_observed.csv")

    # clip guards tiny float excursions so every trial lands in a bin
    counts, edges = np.histogram(np.clip(Y, -1.0, 0.0), bins=HIST_BINS, range=(-1.0, 0.0))
    _write_csv(out / "histogram.csv", ["bin_left", "bin_right", "count"],
               [(edges[i], edges[i + 1], int(counts[i])) for i in range(HIST_BINS)])
    written.append(out / "histogram.csv")

    save_model(model, out / "gp_model.json")
    written.append(out / "gp_model.json")

    if record.path is not None and Path(record.path).exists():
        (out / "record.jsonl").write_bytes(Path(record.path).read_bytes())
        written.append(out / "record.jsonl")

    cfg_doc = record.config
    if cfg_doc.get("mazes") != ["custom"]:
        consts = SwarmConstants(**cfg_doc["consts"])
        best = incumbent(record)
        params = ParamVector.from_array(best.params)
        if cfg_doc.get("maze_dir"):
            mazes = tuple(load_maze(p) for p in sorted(Path(cfg_doc["maze_dir"]).glob("*.json")))
        else:
            mazes = builtin_mazes()
        for maze in mazes:
            replay(params, maze, consts, derive_seed(int(cfg_doc["seed"]), "viz-replay", maze.name),
                   out, cutoff_s=float(cfg_doc["cutoff_s"]), prefix=f"{maze.name}_")
            written += [out / f"{maze.name}_trajectory.csv", out / f"{maze.name}_captures.csv",
                        out / f"{maze.name}_maze.json"]
    return written
