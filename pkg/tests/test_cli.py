from __future__ import annotations

import json
import math
from fractions import Fraction
from dataclasses import replace

import pytest

from maskrisk.cli import main
from maskrisk.experiments import PRESET_IDS, ExperimentConfig, SweepRow, figure_preset, sweep_mask_ratio
from maskrisk.tables import (
    SWEEP_COLUMNS,
    config_from_dict,
    config_to_dict,
    csv_text,
    dump_configs,
    load_configs,
    parse_sweep_csv,
)

SIM = {
    "experiment_id": "cli",
    "covariance": {"kind": "spiked", "delta": 10.0},
    "n": 30,
    "gamma": 2.0,
    "p_grid": [0.3, 0.7],
    "r2mae": [[0.4, 0.6]],
    "reps": 3,
    "emit_metrics": True,
}


def _write(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def test_theory_isotropic_row(tmp_path, capsys):
    cfg = _write(tmp_path, "iso.json", {"experiment_id": "iso", "sigma2": 0.0, "gamma": 5.0, "p_grid": [0.5]})
    assert main(["theory", "-q", "--config", cfg]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 2
    cells = dict(zip(lines[0].split(","), lines[1].split(",")))
    total = float(cells["total"])
    assert total == float(Fraction(91, 90))
    # the documented example literal sits one ulp above the correctly rounded value
    assert abs(total - float("1.0111111111111112")) <= math.ulp(total)


def test_simulate_identical_across_threads(tmp_path):
    cfg = _write(tmp_path, "sim.json", SIM)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate", "-q", "--config", cfg, "--seed", "7", "--threads", "1", "--out", str(a)]) == 0
    assert main(["simulate", "-q", "--config", cfg, "--seed", "7", "--threads", "8", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    manifest = json.loads((tmp_path / "a.csv.manifest.json").read_text())
    assert manifest["master_seed"] == 7
    assert manifest["rows"] == len(a.read_text().splitlines()) - 1
    assert config_from_dict(manifest["configs"][0]) == replace(config_from_dict(SIM), master_seed=7)


def test_seed_from_environment(tmp_path, monkeypatch):
    cfg = _write(tmp_path, "sim.json", SIM)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    monkeypatch.setenv("MASKRISK_SEED", "7")
    assert main(["simulate", "-q", "--config", cfg, "--out", str(a)]) == 0
    monkeypatch.delenv("MASKRISK_SEED")
    assert main(["simulate", "-q", "--config", cfg, "--seed", "7", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_unknown_keys_rejected(tmp_path):
    cfg = _write(tmp_path, "bad.json", {**SIM, "repz": 5})
    assert main(["simulate", "-q", "--config", cfg]) == 1
    nested = _write(tmp_path, "bad2.json", {**SIM, "covariance": {"kind": "spiked", "delat": 1}})
    assert main(["simulate", "-q", "--config", nested]) == 1


def test_invalid_values_exit_one(tmp_path):
    cfg = _write(tmp_path, "bad.json", {**SIM, "reps": 0})
    assert main(["simulate", "-q", "--config", cfg]) == 1
    assert main(["preset", "-q", "nope"]) == 1


def test_numerical_failure_exit_two(tmp_path):
    cfg = _write(tmp_path, "skip.json", {**SIM, "n": 4, "p_grid": [0.01], "r2mae": [], "reps": 4})
    assert main(["simulate", "-q", "--config", cfg]) == 2


def test_preset_emits_configs(capsys):
    assert main(["preset", "-q", "fig1a"]) == 0
    configs = load_configs(capsys.readouterr().out)
    assert [(c.n, c.dim) for c in configs] == [(2000, 10000), (4000, 2000)]


def test_oracle_report(capsys):
    assert main(["oracle", "-q", "--instances", "3", "--draws", "2000"]) in (0, 3)
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 5
    assert all(line.split()[0] in ("PASS", "FAIL") for line in lines)


@pytest.mark.parametrize("pid", PRESET_IDS)
def test_preset_config_round_trip(pid):
    configs = figure_preset(pid)
    assert load_configs(dump_configs(configs)) == configs
    for cfg in configs:
        assert config_from_dict(json.loads(json.dumps(config_to_dict(cfg)))) == cfg


def test_csv_round_trip_bitwise():
    cfg = config_from_dict(SIM)
    rows = sweep_mask_ratio(cfg).rows
    text = csv_text(rows, SWEEP_COLUMNS)
    assert "\r" not in text
    assert text.splitlines()[0] == ",".join(SWEEP_COLUMNS)
    assert parse_sweep_csv(text) == rows


def test_single_row_two_lines():
    row = SweepRow("x", 0, "identity", 2, 2, 1.0, 0.04, "null", None, None, None, 2, 1.0, 1.0)
    text = csv_text([row])
    assert text.count("\n") == 2
    assert text.splitlines()[1].split(",")[12] == "1"
    assert parse_sweep_csv(text) == [row]


def test_empty_rows_rejected():
    with pytest.raises(ValueError):
        csv_text([])
