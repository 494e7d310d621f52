"""Command-line surface: subcommands, config file, flag overrides."""

import json

import pytest

from swarmtune.cli import main
from swarmtune.orchestrator import RunRecord


def run_tiny_campaign(tmp_path, capsys):
    out = tmp_path / "run"
    rc = main(["run", "--acq", "random", "--epochs", "1", "--init", "2",
               "--batch", "1", "--mc", "32", "--seed", "3",
               "--out", str(out), "--cutoff-s", "1.0", "--agents", "4"])
    assert rc == 0
    capsys.readouterr()
    return out / "record.jsonl"


class TestRunCommand:
    def test_tiny_run_writes_record(self, tmp_path, capsys):
        record_path = run_tiny_campaign(tmp_path, capsys)
        record = RunRecord.load(record_path)
        assert len(record.trials) == 3
        assert record.config["acq"] == "random"
        assert record.config["consts"]["n_agents"] == 4

    def test_config_file_with_flag_override(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text('acq = "random"\nepochs = 1\ninit = 2\nbatch = 1\n'
                       f'seed = 5\nagents = 4\ncutoff_s = 1.0\nout = "{tmp_path}/from_toml"\n')
        rc = main(["run", "--config", str(cfg), "--seed", "9"])
        assert rc == 0
        record = RunRecord.load(tmp_path / "from_toml" / "record.jsonl")
        assert record.config["seed"] == 9          # flag wins over file
        assert record.config["n_epochs"] == 1      # file value honored

    def test_unknown_config_key_rejected(self, tmp_path):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text("nonsense = 1\n")
        with pytest.raises(SystemExit):
            main(["run", "--config", str(cfg)])


class TestReplayCommand:
    def test_params_file_with_clamp(self, tmp_path, capsys):
        pfile = tmp_path / "params.json"
        pfile.write_text(json.dumps({
            "sigma": 2.0, "eta_s": 1.0, "eta_r": 1.0, "kappa": 6.6,
            "omega_0": 0.5, "omega_I": 0.5, "tau_q": 0.5, "tau_r": 0.5, "tau_c": 0.5,
        }))
        out = tmp_path / "replay"
        with pytest.warns(UserWarning, match="kappa"):
            rc = main(["replay", "--params-file", str(pfile), "--maze", "tunnel",
                       "--seed", "1", "--out", str(out), "--agents", "4",
                       "--duration-s", "1.0"])
        assert rc == 0
        assert (out / "tunnel_trajectory.csv").exists()
        assert (out / "tunnel_captures.csv").exists()

    def test_from_record_incumbent(self, tmp_path, capsys):
        record_path = run_tiny_campaign(tmp_path, capsys)
        out = tmp_path / "replay"
        rc = main(["replay", "--from-record", str(record_path), "--maze", "hairpin",
                   "--out", str(out), "--agents", "4", "--duration-s", "1.0"])
        assert rc == 0
        assert (out / "hairpin_trajectory.csv").exists()

    def test_missing_source_rejected(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["replay", "--maze", "hairpin", "--out", str(tmp_path)])


class TestAnalysisCommands:
    def test_export_viz_and_report(self, tmp_path, capsys):
        record_path = run_tiny_campaign(tmp_path, capsys)
        out = tmp_path / "viz"
        assert main(["export-viz", "--record", str(record_path), "--out", str(out)]) == 0
        assert (out / "samples.csv").exists()
        assert main(["report", "--record", str(record_path)]) == 0
        text = capsys.readouterr().out
        assert "incumbent" in text

    def test_anticipate(self, tmp_path, capsys):
        record_path = run_tiny_campaign(tmp_path, capsys)
        out = tmp_path / "ant"
        assert main(["anticipate", "--record", str(record_path), "--n", "4",
                     "--out", str(out)]) == 0
        rows = (out / "anticipated.csv").read_text().splitlines()
        assert len(rows) - 1 == 4
