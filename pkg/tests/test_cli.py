"""Command-line interface tests: output files, exit codes, round trips
between commands, and byte-level determinism of written CSVs."""

import json

import numpy as np
import pytest

from floodrom.cli import main
from floodrom.config import ScenarioConfig
from floodrom.defaults import base_scenario
from floodrom.pod import load_basis, load_snapshots


@pytest.fixture(scope="module")
def tiny_yaml(tmp_path_factory):
    """A desk-scale scenario small enough for whole-CLI round trips."""
    raw = base_scenario().to_dict()
    raw["grid"].update(nx=12, ny=10, lx_m=300.0, ly_m=250.0)
    raw["fields"].update(width_m=80.0, amplitude_m=40.0)
    raw["wells"]["injectors"] = [
        {"row": 0, "col": 0, "bhp_bar": 250.0},
        {"row": 9, "col": 11, "bhp_bar": 250.0},
    ]
    raw["wells"]["producer"].update(x_m=150.0, y_m=125.0, azimuth_deg=30.0,
                                    length_m=40.0)
    raw["schedule"].update(total_days=25.0, recording_stride=2, dt_max_days=1.0)
    raw["training"].update(bhp_min_bar=260.0, bhp_max_bar=300.0,
                           control_period_days=10.0)
    path = tmp_path_factory.mktemp("cfg") / "tiny.yaml"
    ScenarioConfig.from_dict(raw).to_yaml(path)
    return str(path)


def test_simulate_writes_rates_and_metadata(tiny_yaml, tmp_path, capsys):
    out = tmp_path / "run"
    rc = main(["simulate", "--config", tiny_yaml, "--out", str(out)])
    assert rc == 0
    assert (out / "rates.csv").exists()
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["model"] == "full"
    assert meta["backend"] in ("pure", "compiled")
    assert meta["n_steps"] >= 25
    assert meta["mass_balance_error"] < 1e-8
    assert str(out / "rates.csv") in capsys.readouterr().out


def test_simulate_rates_byte_deterministic(tiny_yaml, tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", tiny_yaml, "--out", str(out1)]) == 0
    assert main(["simulate", "--config", tiny_yaml, "--out", str(out2)]) == 0
    assert (out1 / "rates.csv").read_bytes() == (out2 / "rates.csv").read_bytes()


def test_simulate_snapshot_export(tiny_yaml, tmp_path):
    out = tmp_path / "run"
    snaps = tmp_path / "snaps.txt"
    rc = main(["simulate", "--config", tiny_yaml, "--out", str(out),
               "--snapshots-out", str(snaps)])
    assert rc == 0
    X = load_snapshots(snaps)
    assert X.n == 12 * 10
    assert X.m >= 5


def test_train_rom_simulate_roundtrip(tiny_yaml, tmp_path, capsys):
    train_dir = tmp_path / "train"
    rc = main(["train", "--config", tiny_yaml, "--mode", "local",
               "--snapshots", "8", "--components", "4",
               "--out", str(train_dir)])
    assert rc == 0
    printed = capsys.readouterr().out
    assert "r=4" in printed
    basis = load_basis(train_dir / "basis.txt")
    assert basis.r == 4
    assert basis.lineage.kind == "local"
    energy_lines = (train_dir / "energy.csv").read_text().splitlines()
    assert energy_lines[0] == "component,cumulative_energy"
    # the energy table covers the full training spectrum (one row per
    # snapshot), not just the kept components
    assert len(energy_lines) == 1 + 8
    # cumulative energies are a nondecreasing sequence ending at 1
    energies = [float(ln.split(",")[1]) for ln in energy_lines[1:]]
    assert energies == sorted(energies)
    assert energies[-1] == pytest.approx(1.0, rel=1e-12)

    rom_dir = tmp_path / "rom"
    rc = main(["simulate", "--config", tiny_yaml, "--model", "rom",
               "--basis", str(train_dir / "basis.txt"), "--out", str(rom_dir)])
    assert rc == 0
    meta = json.loads((rom_dir / "metadata.json").read_text())
    assert meta["model"] == "rom"
    assert meta["basis"]["r"] == 4
    assert meta["basis"]["hash"] == basis.content_hash()


def test_train_universal_mode(tiny_yaml, tmp_path):
    out = tmp_path / "uni"
    rc = main(["train", "--config", tiny_yaml, "--mode", "universal",
               "--snapshots", "6", "--components", "3", "--out", str(out)])
    assert rc == 0
    basis = load_basis(out / "basis.txt")
    assert basis.lineage.kind == "universal"
    assert basis.r == 3


def test_adapt_zero_components_keeps_vectors(tiny_yaml, tmp_path):
    train_dir = tmp_path / "train"
    main(["train", "--config", tiny_yaml, "--snapshots", "6",
          "--components", "3", "--out", str(train_dir)])
    base = load_basis(train_dir / "basis.txt")
    adapt_dir = tmp_path / "adapt0"
    rc = main(["adapt", "--config", tiny_yaml,
               "--basis", str(train_dir / "basis.txt"),
               "--snapshots", "2", "--components", "0",
               "--out", str(adapt_dir)])
    assert rc == 0
    out = load_basis(adapt_dir / "basis.txt")
    assert np.array_equal(out.U, base.U)
    assert out.lineage.kind == "adaptive"
    assert out.lineage.r_res == 0
    assert out.lineage.base_hash == base.content_hash()


def test_adapt_appends_residual_components(tiny_yaml, tmp_path):
    train_dir = tmp_path / "train"
    main(["train", "--config", tiny_yaml, "--snapshots", "6",
          "--components", "3", "--out", str(train_dir)])
    # rotate the producer so the residual step sees a new configuration
    cfg = ScenarioConfig.from_yaml(tiny_yaml).with_producer(azimuth_deg=120.0)
    rotated = tmp_path / "rotated.yaml"
    cfg.to_yaml(rotated)
    adapt_dir = tmp_path / "adapt"
    rc = main(["adapt", "--config", str(rotated),
               "--basis", str(train_dir / "basis.txt"),
               "--snapshots", "4", "--components", "1",
               "--out", str(adapt_dir)])
    assert rc == 0
    out = load_basis(adapt_dir / "basis.txt")
    assert out.r == 4
    assert out.lineage.kind == "adaptive"
    assert out.lineage.r_res == 1
    assert out.lineage.n_snapshots == 4


def test_evaluate_worked_example(tmp_path, capsys):
    ref = tmp_path / "ref.csv"
    pred = tmp_path / "pred.csv"
    header = "time_s,water_rate_m3s,oil_rate_m3s\n"
    ref.write_text(header + "0,1,1\n1,2,2\n2,3,3\n")
    pred.write_text(header + "0,2,1\n1,3,2\n2,4,3\n")
    report = tmp_path / "report.csv"
    rc = main(["evaluate", str(ref), str(pred), "--points", "3",
               "--label", "case", "--out", str(report)])
    assert rc == 0
    out = capsys.readouterr().out
    # water: constant offset 1 on variance 2 -> sqrt(3/2); oil: exact match
    assert f"rrse_water={np.sqrt(1.5):.17g}" in out
    assert "rrse_oil=0" in out
    assert report.read_text().splitlines()[1].startswith("case,")


def test_evaluate_constant_reference_fails(tmp_path, capsys):
    ref = tmp_path / "ref.csv"
    pred = tmp_path / "pred.csv"
    header = "time_s,water_rate_m3s,oil_rate_m3s\n"
    ref.write_text(header + "0,5,5\n1,5,5\n")
    pred.write_text(header + "0,4,6\n1,6,4\n")
    rc = main(["evaluate", str(ref), str(pred)])
    assert rc == 1
    assert "error" in capsys.readouterr().err


def test_rom_without_basis_is_config_error(tiny_yaml, tmp_path, capsys):
    rc = main(["simulate", "--config", tiny_yaml, "--model", "rom",
               "--out", str(tmp_path / "x")])
    assert rc == 2
    assert "config error" in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    rc = main(["simulate", "--config", str(tmp_path / "nope.yaml"),
               "--out", str(tmp_path / "x")])
    assert rc == 1
    assert "i/o error" in capsys.readouterr().err


def test_unknown_experiment_rejected():
    with pytest.raises(SystemExit):
        main(["reproduce", "made-up-experiment"])
