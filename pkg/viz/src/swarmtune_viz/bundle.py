"""Locate and parse the optimizer's exported artifacts for one run."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd

PARAM_COLUMNS = ["sigma", "eta_s", "eta_r", "kappa", "omega_0", "omega_I",
                 "tau_q", "tau_r", "tau_c"]


class BundleError(FileNotFoundError):
    """An expected export file is missing or malformed."""


@dataclass
class VizBundle:
    """One run's export directory plus the embedding settings."""

    in_dir: Path
    out_dir: Path
    neighbors: int = 15
    min_dist: float = 0.1
    seed: int = 0
    label: str = field(default="", repr=False)

    def __post_init__(self):
        self.in_dir = Path(self.in_dir)
        self.out_dir = Path(self.out_dir)
        if not self.in_dir.is_dir():
            raise BundleError(f"{self.in_dir}: not a directory")
        if not self.label:
            self.label = self.run_config().get("acq", self.in_dir.name)

    def _require(self, name: str) -> Path:
        path = self.in_dir / name
        if not path.exists():
            raise BundleError(f"{path}: missing export")
        return path

    def samples(self) -> pd.DataFrame:
        df = pd.read_csv(self._require("samples.csv"))
        missing = [c for c in PARAM_COLUMNS + ["y", "post_mean", "post_var"]
                   if c not in df.columns]
        if missing:
            raise BundleError(f"samples.csv: missing columns {missing}")
        return df

    def metrics(self) -> pd.DataFrame:
        return pd.read_csv(self._require("metrics.csv"))

    def best_observed(self) -> pd.DataFrame:
        return pd.read_csv(self._require("best_observed.csv"))

    def histogram(self) -> pd.DataFrame:
        return pd.read_csv(self._require("histogram.csv"))

    def run_config(self) -> dict:
        path = self.in_dir / "record.jsonl"
        if not path.exists():
            return {}
        with open(path) as fh:
            for line in fh:
                doc = json.loads(line)
                if doc.get("type") == "config":
                    return doc
        return {}

    def maze_names(self) -> list[str]:
        return sorted(p.name.removesuffix("_maze.json")
                      for p in self.in_dir.glob("*_maze.json"))

    def maze(self, name: str) -> dict:
        return json.loads(self._require(f"{name}_maze.json").read_text())

    def trajectory(self, name: str) -> pd.DataFrame:
        return pd.read_csv(self._require(f"{name}_trajectory.csv"))

    def captures(self, name: str) -> pd.DataFrame:
        return pd.read_csv(self._require(f"{name}_captures.csv"))
