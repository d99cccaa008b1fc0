import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from dqrc.cli import main


def write_config(tmp_path, **overrides):
    cfg = {
        "schema_version": 1,
        "model": "cd",
        "n_qubits": 2,
        "task": {"kind": "stm", "delay": 1},
        "grid": {"h": [0.5], "dt": [0.5], "gamma": [1.0]},
        "lengths": {"washout": 20, "train": 50, "test": 30},
        "multiplex": {"virtual_nodes": 1, "spatial_copies": 1},
        "sampling": {"n_samples": None},
        "n_realizations": 2,
        "master_seed": 11,
    }
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestRunTask:
    def test_end_to_end(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        out = tmp_path / "results"
        assert main(["run-task", "--config", cfg, "--out", str(out)]) == 0
        rows = read_csv(out / "cells.csv")
        assert len(rows) == 2
        assert all(0.0 <= float(r["value"]) <= 1.0 for r in rows)
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["master_seed"] == 11
        summary = read_csv(out / "summary.csv")
        assert sum(int(r["optimal"]) for r in summary) == 1

    def test_flag_overrides(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "results"
        assert main(["run-task", "--config", cfg, "--out", str(out), "--seed", "99", "--realizations", "1"]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["master_seed"] == 99
        assert manifest["config"]["n_realizations"] == 1

    def test_sweep_subcommand(self, tmp_path):
        cfg = write_config(tmp_path, sweep={"param": "delay", "values": [0, 1]})
        out = tmp_path / "results"
        assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
        rows = read_csv(out / "cells.csv")
        assert len(rows) == 4

    def test_error_emits_json(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"schema_version": 1, "model": "nope", "n_qubits": 2}))
        code = main(["run-task", "--config", str(bad), "--out", str(tmp_path / "x")])
        assert code != 0
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "ValueError"
        assert "nope" in err["message"]

    def test_missing_config_file(self, tmp_path, capsys):
        code = main(["run-task", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path / "x")])
        assert code != 0
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "FileNotFoundError"


class TestAnalysisCommands:
    def test_mixing_time(self, tmp_path):
        cfg = tmp_path / "mix.json"
        cfg.write_text(
            json.dumps(
                {
                    "n_values": [2, 3],
                    "h_values": [0.1, 1.0],
                    "gamma_values": [1.0],
                    "n_realizations": 2,
                    "master_seed": 3,
                }
            )
        )
        out = tmp_path / "mix_out"
        assert main(["mixing-time", "--config", str(cfg), "--out", str(out)]) == 0
        rows = read_csv(out / "mixing_time.csv")
        assert len(rows) == 2 * 2 * 2
        assert all(float(r["lambda1"]) < 0 for r in rows)
        fig6 = read_csv(out / "fig6.csv")
        assert [r["n_qubits"] for r in fig6] == ["2", "3"]
        summary = json.loads((out / "summary.json").read_text())
        assert "fit_slope" in summary

    def test_esp_check(self, tmp_path):
        cfg = write_config(tmp_path, grid={"h": [0.5], "dt": [2.0], "gamma": [1.0]})
        out = tmp_path / "esp"
        assert main(["esp-check", "--config", cfg, "--steps", "40", "--out", str(out)]) == 0
        rows = read_csv(out / "esp_trace.csv")
        assert len(rows) == 40
        assert float(rows[-1]["distance"]) < float(rows[0]["distance"])

    def test_fn_approx(self, tmp_path):
        out = tmp_path / "fnapprox"
        assert main(
            ["fn-approx", "--n-qubits", "2", "--pairs", "20", "--grid-points", "5", "--out", str(out)]
        ) == 0
        rows = read_csv(out / "fn_approx.csv")
        dists = [float(r["mean_distance"]) for r in rows]
        assert dists[-1] < dists[0]

    def test_emit_plot(self, tmp_path):
        cfg = write_config(tmp_path, sweep={"param": "delay", "values": [0, 1]})
        store_dir = tmp_path / "store"
        assert main(["sweep", "--config", cfg, "--out", str(store_dir)]) == 0
        out_csv = tmp_path / "fig2a.csv"
        assert main(["emit-plot", "--figure", "fig2a", "--store", str(store_dir), "--out", str(out_csv)]) == 0
        rows = read_csv(out_csv)
        assert len(rows) == 2
        assert set(rows[0]) == {"tau", "capacity_mean", "capacity_std", "model"}


class TestConsoleEntryPoint:
    def test_module_invocation(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "results"
        proc = subprocess.run(
            [sys.executable, "-m", "dqrc.cli", "run-task", "--config", cfg, "--out", str(out)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert (out / "cells.csv").exists()

    def test_exit_code_on_error(self):
        proc = subprocess.run(
            [sys.executable, "-m", "dqrc.cli", "emit-plot", "--figure", "nope", "--store", "/absent", "--out", "/tmp/x.csv"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 1
        err = json.loads(proc.stderr)
        assert "error" in err
