"""Command-line surface: run campaigns, replay episodes, export analyses."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:          # Python < 3.11
    import tomli as tomllib

from .env import builtin_mazes, load_maze
from .orchestrator import (RunConfig, RunRecord, anticipate, best_observed_trace,
                           export_viz, incumbent, model_from_record, replay, run_bo)
from .params import PARAM_NAMES, ParamVector, SwarmConstants

_CONFIG_KEYS = {
    "acq": "acq", "epochs": "n_epochs", "init": "n_init", "batch": "q",
    "mc": "n_mc", "seed": "seed", "maze_dir": "maze_dir", "out": "out_dir",
    "cutoff_s": "cutoff_s", "agents": "agents", "workers": "workers",
}


def _build_run_config(args) -> RunConfig:
    values = {}
    if args.config:
        doc = tomllib.loads(Path(args.config).read_text())
        for key, val in doc.items():
            if key not in _CONFIG_KEYS:
                raise SystemExit(f"config: unknown key {key!r}")
            values[_CONFIG_KEYS[key]] = val
    for key, field in _CONFIG_KEYS.items():
        flag = getattr(args, key.replace("-", "_"), None)
        if flag is not None:
            values[field] = flag
    agents = values.pop("agents", None)
    consts = SwarmConstants(n_agents=int(agents)) if agents else SwarmConstants()
    return RunConfig(consts=consts, **values)


def _resolve_maze(name_or_path: str):
    hairpin, tunnel = builtin_mazes()
    if name_or_path == "hairpin":
        return hairpin
    if name_or_path == "tunnel":
        return tunnel
    return load_maze(name_or_path)


def _cmd_run(args) -> int:
    cfg = _build_run_config(args)
    record = run_bo(cfg)
    best = incumbent(record)
    print(f"record: {Path(cfg.out_dir) / 'record.jsonl'}")
    print(f"trials: {len(record.trials)}  incumbent Y = {best.y:.6f} (trial {best.index})")
    return 0


def _cmd_replay(args) -> int:
    if args.params_file:
        doc = json.loads(Path(args.params_file).read_text())
        missing = [n for n in PARAM_NAMES if n not in doc]
        if missing:
            raise SystemExit(f"params file missing keys: {missing}")
        params = ParamVector.clamped(**{n: doc[n] for n in PARAM_NAMES})
    elif args.from_record:
        record = RunRecord.load(args.from_record)
        entry = record.trials[args.trial] if args.trial is not None else incumbent(record)
        params = ParamVector.from_array(entry.params)
        print(f"replaying trial {entry.index} (Y = {entry.y:.6f})")
    else:
        raise SystemExit("one of --params-file or --from-record is required")
    maze = _resolve_maze(args.maze)
    consts = SwarmConstants(n_agents=args.agents) if args.agents else SwarmConstants()
    res = replay(params, maze, consts, args.seed, args.out,
                 cutoff_s=args.duration_s, prefix=f"{maze.name}_")
    times = [f"R{k + 1}={t:.2f}s" if t is not None else f"R{k + 1}=--"
             for k, t in enumerate(res.capture_times_s)]
    print(f"{maze.name}: captured {res.n_captured}/{maze.n_rewards}  " + "  ".join(times))
    return 0


def _cmd_anticipate(args) -> int:
    record = RunRecord.load(args.record)
    model = model_from_record(record)
    cfg_doc = record.config
    cfg = RunConfig(
        acq=cfg_doc.get("acq", "qei"), n_init=cfg_doc.get("n_init", 24),
        n_epochs=cfg_doc.get("n_epochs", 30), q=cfg_doc.get("q", 3),
        n_mc=cfg_doc.get("n_mc", 512), n_raw=cfg_doc.get("n_raw", 256),
        n_starts=cfg_doc.get("n_starts", 8), cutoff_s=cfg_doc.get("cutoff_s", 120.0),
        seed=cfg_doc.get("seed", 0),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = anticipate(model, cfg, args.n, out_path=out / "anticipated.csv")
    print(f"wrote {len(table)} acquisition-chosen samples to {out / 'anticipated.csv'}")
    return 0


def _cmd_export_viz(args) -> int:
    record = RunRecord.load(args.record)
    model = model_from_record(record)
    written = export_viz(record, model, args.out)
    for p in written:
        print(p)
    return 0


def _cmd_report(args) -> int:
    record = RunRecord.load(args.record)
    best = incumbent(record)
    trace = best_observed_trace(record)
    print(f"trials: {len(record.trials)}   epochs: {len(record.epochs)}")
    print(f"incumbent: trial {best.index} (epoch {best.epoch})  Y = {best.y:.6f}")
    for name, v in zip(PARAM_NAMES, best.params):
        print(f"  {name:8s} = {v:.6f}")
    print(f"best-observed trace: {trace[0]:.4f} -> {trace[-1]:.4f}")
    if record.epochs:
        print("epoch  max_post_var  dissimilarity  best_observed")
        for e in record.epochs:
            print(f"{e.epoch:5d}  {e.max_post_var:12.6g}  {e.dissimilarity:13.6g}  "
                  f"{e.best_observed:13.6f}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="swarmtune", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an optimization campaign")
    p_run.add_argument("--config", help="TOML config file; flags override it")
    p_run.add_argument("--acq", choices=["qei", "qnei", "random"])
    p_run.add_argument("--epochs", type=int)
    p_run.add_argument("--init", type=int)
    p_run.add_argument("--batch", type=int)
    p_run.add_argument("--mc", type=int)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--maze-dir")
    p_run.add_argument("--out")
    p_run.add_argument("--cutoff-s", type=float)
    p_run.add_argument("--agents", type=int)
    p_run.add_argument("--workers", type=int)
    p_run.set_defaults(func=_cmd_run)

    p_rep = sub.add_parser("replay", help="replay one episode with full logging")
    p_rep.add_argument("--params-file")
    p_rep.add_argument("--from-record")
    p_rep.add_argument("--trial", type=int)
    p_rep.add_argument("--maze", default="hairpin",
                       help="builtin name (hairpin/tunnel) or a maze JSON path")
    p_rep.add_argument("--seed", type=int, default=0)
    p_rep.add_argument("--out", default="replay-out")
    p_rep.add_argument("--agents", type=int)
    p_rep.add_argument("--duration-s", type=float,
                       help="episode length; defaults to the full duration")
    p_rep.set_defaults(func=_cmd_replay)

    p_ant = sub.add_parser("anticipate", help="score acquisition-chosen samples")
    p_ant.add_argument("--record", required=True)
    p_ant.add_argument("--n", type=int, default=500)
    p_ant.add_argument("--out", required=True)
    p_ant.set_defaults(func=_cmd_anticipate)

    p_exp = sub.add_parser("export-viz", help="write analysis artifacts")
    p_exp.add_argument("--record", required=True)
    p_exp.add_argument("--out", required=True)
    p_exp.set_defaults(func=_cmd_export_viz)

    p_rpt = sub.add_parser("report", help="print incumbent and metrics")
    p_rpt.add_argument("--record", required=True)
    p_rpt.set_defaults(func=_cmd_report)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
