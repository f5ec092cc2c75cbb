import json

import pytest
import yaml

from cascade.cli import main
from cascade.io import read_csv

DEVICE = {"chi_aa": 312.0, "chi_bb": 200e6, "chi_ab": 0.5e6, "Delta": 50e6}


def write(tmp_path, scenario, **sections):
    cfg = {"schema_version": 1, "scenario": scenario, "device": dict(DEVICE), **sections}
    for key, val in sections.get("device_extra", {}).items():
        cfg["device"][key] = val
    cfg.pop("device_extra", None)
    p = tmp_path / f"{scenario}.yaml"
    p.write_text(yaml.safe_dump(cfg))
    return p


def test_derive_params_outputs(tmp_path):
    cfg = write(tmp_path, "derive-params", pumps={"g2": 2e6, "g3": 460e3}, device_extra={"Gamma_1": 2e6})
    out = tmp_path / "out"
    assert main(["derive-params", "--config", str(cfg), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    d = report["derived"]
    assert d["g1"]["hz"] == pytest.approx(899e3, rel=5e-3)
    assert d["g1"]["rad_s"] == pytest.approx(2 * 3.141592653589793 * d["g1"]["hz"])
    assert d["inverse_kappa_4ph"]["s"] == pytest.approx(96e-6, rel=0.03)
    assert "validity" in d
    assert "wall_time_s" not in json.dumps(report)
    assert (out / "timing.json").exists()
    assert yaml.safe_load((out / "resolved_config.yaml").read_text())["scenario"] == "derive-params"


def test_custom_writes_csv_json_png(tmp_path):
    cfg = write(tmp_path, "custom", pumps={"g2": 2e6, "g3": 460e3},
                device_extra={"Gamma_1": 3e3, "Gamma_fg_eng": 4e6},
                simulation={"model": "cavity", "t_final": 2e-6, "samples": 11, "cavity_dim": 24},
                output={"snapshot_times": [2e-6], "wigner_grid": {"range": 2.0, "points": 11}})
    out = tmp_path / "o"
    assert main(["custom", "--config", str(cfg), "--out", str(out)]) == 0
    names = {p.name for p in out.iterdir()}
    assert {"custom.csv", "custom.json", "custom.png", "report.json"} <= names
    assert any(n.startswith("custom_wigner") and n.endswith(".csv") for n in names)
    tr = read_csv(out / "custom.csv")
    assert len(tr.times) == 11 and "fidelity" in tr.observables


def test_fixed_step_runs_are_byte_identical(tmp_path):
    cfg = write(tmp_path, "custom", pumps={"g2": 2e6, "g3": 0.0},
                simulation={"model": "effective", "t_final": 1e-6, "samples": 21, "cavity_dim": 8,
                            "initial": {"level": "f", "n": 0}})
    blobs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["custom", "--config", str(cfg), "--out", str(out), "--fixed-step", "--no-plots"]) == 0
        blobs.append(((out / "custom.csv").read_bytes(), (out / "report.json").read_bytes()))
    assert blobs[0] == blobs[1]


def test_config_errors_exit_2(tmp_path, capsys):
    assert main(["fig2", "--config", str(tmp_path / "nope.yaml")]) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("scenario: fig2-exchange\ndevice: {chi_bb: 1.0, colour: red}\n")
    assert main(["fig2", "--config", str(bad)]) == 2
    assert "unknown key" in capsys.readouterr().err
    assert main(["fig3", "--config", str(write(tmp_path, "custom"))]) == 2
    assert main(["bogus", "--config", "x"]) == 2


def test_regime_violation_exit_2(tmp_path):
    cfg = write(tmp_path, "derive-params", device_extra={"chi_bb": 60e6})
    assert main(["derive-params", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_bad_thread_variable_exit_2(tmp_path, monkeypatch):
    monkeypatch.setenv("CASCADE_THREADS", "zero")
    cfg = write(tmp_path, "derive-params", pumps={"g2": 2e6})
    assert main(["derive-params", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_numerical_failure_exit_3(tmp_path, capsys):
    # no junction decay at all: the four-photon rate is undefined
    cfg = write(tmp_path, "custom", pumps={"g2": 2e6, "g3": 460e3},
                simulation={"model": "three-level", "t_final": 1e-6, "samples": 3})
    assert main(["custom", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    assert "numerical failure" in capsys.readouterr().err
