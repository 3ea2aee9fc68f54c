import json
import subprocess
import sys

import pytest

from qacrystal.cli import ConfigError, model_from_dict, model_to_dict, run

HARMONIC = {"lattice": {"d": 3, "L": 1, "boundary": "periodic"},
            "interaction": {"kind": "nearest_neighbor", "J": 0.1},
            "potential": {"coeffs": [0.0]}, "m": 1.0, "a": 1.0, "beta": 1.0}

SMALL = {"lattice": {"d": 1, "L": 1}, "interaction": {"J": 0.3},
         "potential": {"coeffs": [-0.5, 0.5]}, "m": 1.0, "a": 1.0, "beta": 1.0}


def write(tmp_path, cfg, name="model.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def test_criteria_on_harmonic(tmp_path):
    cfg = write(tmp_path, HARMONIC)
    out = tmp_path / "out"
    assert run(["criteria", "--config", cfg, "--out", str(out)]) == 0
    rep = json.loads((out / "criteria.json").read_text())
    assert rep["j_hat_zero"] == pytest.approx(0.6)
    assert rep["m_gap_squared"] == pytest.approx(1.0, rel=1e-6)
    assert rep["high_temperature_uniqueness"]["holds"] and rep["quantum_stabilization"]["holds"]
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["exit_status"] == 0 and "criteria.json" in meta["artifacts"]


def test_missing_key_names_it(tmp_path, capsys):
    cfg = dict(HARMONIC)
    del cfg["beta"]
    assert run(["criteria", "--config", write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 1
    assert "beta" in capsys.readouterr().err


def test_unknown_and_bad_keys():
    with pytest.raises(ConfigError, match="lattice.size"):
        model_from_dict(HARMONIC | {"lattice": {"d": 1, "L": 1, "size": 3}})
    with pytest.raises(ConfigError, match="'a'"):
        model_from_dict(HARMONIC | {"a": "one"})


def test_config_round_trip():
    m = model_from_dict(SMALL)
    assert model_to_dict(model_from_dict(model_to_dict(m))) == model_to_dict(m)


def test_verify_inequalities_default_sweep(tmp_path):
    out = tmp_path / "v"
    assert run(["verify-inequalities", "--out", str(out)]) == 0
    rep = json.loads((out / "inequalities.json").read_text())
    assert rep["all_pass"] and rep["draws"] == 20
    assert all(c["verdict"] == "PASS" for c in rep["checks"])
    assert all("certificate" in c for c in rep["checks"])


def test_refuses_to_overwrite(tmp_path):
    cfg = write(tmp_path, HARMONIC)
    out = str(tmp_path / "o")
    assert run(["criteria", "--config", cfg, "--out", out]) == 0
    assert run(["criteria", "--config", cfg, "--out", out]) == 1
    assert run(["criteria", "--config", cfg, "--out", out, "--force"]) == 0


@pytest.mark.parametrize("argv, artifact", [
    (["sample", "--P", "4", "--sweeps", "800", "--burn-in", "100", "--chains", "2"], "sample.csv"),
    (["pressure", "--P", "3", "--sweeps", "600", "--burn-in", "100", "--h-grid=-0.5:0.5:3"],
     "pressure.csv"),
    (["leeyang", "--P", "2", "--degree", "6", "--sites", "0"], "leeyang.json"),
    (["spectrum", "--levels", "12"], "spectrum.json"),
])
def test_byte_identical_artifacts(tmp_path, argv, artifact):
    cfg = write(tmp_path, SMALL)
    outs = []
    for k in range(2):
        out = tmp_path / f"r{k}"
        status = run(argv + ["--config", cfg, "--out", str(out)])
        assert status == 0
        outs.append((out / artifact).read_bytes())
    assert outs[0] == outs[1]


def test_phase_scan_grid(tmp_path):
    cfg = write(tmp_path, HARMONIC | {"potential": {"coeffs": [-1.0, 1.0]}})
    out = tmp_path / "p"
    assert run(["phase-scan", "--config", cfg, "--out", str(out), "--beta-grid", "0.5,1,2",
                "--values", "0.1,20"]) == 0
    lines = (out / "phase_scan.csv").read_text().strip().splitlines()
    assert len(lines) == 1 + 6


def test_checkpoint_resume(tmp_path):
    cfg = write(tmp_path, SMALL)
    a = tmp_path / "a"
    assert run(["sample", "--config", cfg, "--out", str(a), "--P", "4", "--sweeps", "300",
                "--burn-in", "50", "--checkpoint"]) == 0
    b = tmp_path / "b"
    assert run(["sample", "--config", cfg, "--out", str(b), "--P", "4", "--sweeps", "300",
                "--burn-in", "50", "--resume", str(a / "checkpoint.json")]) == 0


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "qacrystal.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("spectrum", "criteria", "sample", "verify-inequalities", "phase-scan", "leeyang", "pressure"):
        assert cmd in res.stdout
