import json
import os
from pathlib import Path

import pytest
import yaml

from ispsim.cli import EXIT_ACCEPTANCE, EXIT_DIVERGENCE, EXIT_OK, EXIT_VALIDATION, main
from ispsim.scenario import Scenario, design_controllers
from ispsim.simulation import CSV_COLUMNS


class Sandbox:
    """Working directory whose only writable areas are the output directories."""

    OUTPUTS = ("out", "env-out")

    def __init__(self, root: Path):
        self.root = root
        self.inputs = {}

    def write(self, name: str, data) -> Path:
        path = self.root / "inputs" / name
        path.write_text(yaml.safe_dump(data))
        self.inputs[path] = path.read_bytes()
        return path

    def __truediv__(self, other):
        return self.root / other

    def check(self):
        for path, content in self.inputs.items():
            assert path.read_bytes() == content, path
        for p in self.root.rglob("*"):
            rel = p.relative_to(self.root)
            if rel.parts[0] in self.OUTPUTS or p == self.root / "inputs" or p in self.inputs:
                continue
            pytest.fail(f"unexpected file written: {rel}")


@pytest.fixture
def sandbox(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("ISPSIM_OUT", raising=False)
    (tmp_path / "inputs").mkdir()
    box = Sandbox(tmp_path)
    yield box
    box.check()


def test_help_and_version(capsys):
    assert main(["--help"]) == EXIT_OK
    assert "verify" in capsys.readouterr().out
    assert main(["run", "--help"]) == EXIT_OK
    sub = capsys.readouterr().out
    for flag in ("--scenario", "--out", "--seed", "--quiet", "ISPSIM_OUT"):
        assert flag in sub
    assert main(["--version"]) == EXIT_OK


@pytest.mark.parametrize("argv", [[], ["fly"], ["run", "--seed", "-1"], ["run", "--seed", "x"]])
def test_bad_arguments_are_validation_errors(argv, sandbox):
    assert main(argv) == EXIT_VALIDATION


def test_design_writes_report(sandbox):
    assert main(["design", "--scenario", "step_yaw", "--out", "out", "--quiet"]) == EXIT_OK
    report = json.loads((sandbox / "out" / "step_yaw.design.json").read_text())
    for ch in ("yaw", "pitch"):
        assert 30.4 <= report["stabilization"][ch]["bandwidth_hz"] <= 45.6
        assert report["stabilization"][ch]["resonance_db"] < 3.0
        assert report["tracking"][ch]["bandwidth_hz"] == pytest.approx(1.0, abs=0.2)
    designed = yaml.safe_load((sandbox / "out" / "step_yaw.designed.yaml").read_text())
    assert "designed" in designed["controllers"]


def test_design_malformed_config_names_key(sandbox, capsys):
    cfg = sandbox.write("bad.yaml", {"camera": {"pixel_scal": 0.5}})
    assert main(["design", "--scenario", str(cfg), "--out", "out"]) == EXIT_VALIDATION
    assert "camera.pixel_scal" in capsys.readouterr().err


def test_design_unmeetable_spec(sandbox, capsys):
    cfg = sandbox.write("hard.yaml", {"controllers": {"stabilization_spec": {"resonance_limit_db": 0.01}}})
    assert main(["design", "--scenario", str(cfg), "--out", "out"]) == EXIT_VALIDATION
    assert "resonance" in capsys.readouterr().err


def test_run_designed_config_is_deterministic(sandbox):
    assert main(["design", "--scenario", "static_jitter", "--out", "out", "--quiet"]) == EXIT_OK
    designed = yaml.safe_load((sandbox / "out" / "static_jitter.designed.yaml").read_text())
    designed["run"]["duration"] = 1.0
    cfg = sandbox.write("short.yaml", designed)
    csvs = []
    for _ in range(2):
        assert main(["run", "--scenario", str(cfg), "--out", "out", "--seed", "3", "--quiet"]) == EXIT_OK
        csvs.append((sandbox / "out" / "static_jitter.csv").read_bytes())
    assert csvs[0] == csvs[1]
    header = csvs[0].decode().splitlines()[1].split(",")
    assert header[: len(CSV_COLUMNS)] == list(CSV_COLUMNS)
    assert (sandbox / "out" / "static_jitter.summary.txt").is_file()


def test_run_zero_scenario_gives_zero_rows(sandbox):
    cfg = sandbox.write("zero.yaml", {
        "name": "zero",
        "sensors": {"gyro": {"noise_std": 0.0, "bias": 0.0}},
        "run": {"duration": 0.5},
    })
    assert main(["run", "--scenario", str(cfg), "--out", "out", "--quiet"]) == EXIT_OK
    lines = (sandbox / "out" / "zero.csv").read_text().splitlines()
    header = lines[1].split(",")
    for ln in lines[2:]:
        row = dict(zip(header, map(float, ln.split(","))))
        assert all(v == 0.0 for k, v in row.items() if k not in ("t", "detect"))


def test_run_divergence_exit_code_and_partial_log(sandbox):
    cfg = sandbox.write("boom.yaml", {
        "name": "boom",
        "profiles": {"base_motion": {"kind": "recorded", "times": [0.0, 0.05],
                                     "rates": [[0.0, 0.0, 0.0], [float("inf"), 0.0, 0.0]]}},
        "run": {"duration": 0.2},
    })
    with pytest.warns(RuntimeWarning):
        assert main(["run", "--scenario", str(cfg), "--out", "out", "--quiet"]) == EXIT_DIVERGENCE
    text = (sandbox / "out" / "boom.csv").read_text()
    assert "# diverged at t=" in text


def test_env_var_sets_default_output(sandbox, monkeypatch):
    monkeypatch.setenv("ISPSIM_OUT", str(sandbox / "env-out"))
    cfg = sandbox.write("tiny.yaml", {"name": "tiny", "run": {"duration": 0.1}})
    assert main(["run", "--scenario", str(cfg), "--quiet"]) == EXIT_OK
    assert (sandbox / "env-out" / "tiny.csv").is_file()


def test_output_names_cannot_escape(sandbox):
    cfg = sandbox.write("evil.yaml", {"name": "../../escaped", "run": {"duration": 0.1}})
    assert main(["run", "--scenario", str(cfg), "--out", "out", "--quiet"]) == EXIT_OK
    assert (sandbox / "out" / "escaped.csv").is_file()
    assert not (sandbox.root.parent / "escaped.csv").exists()


def test_metrics_from_csv(sandbox):
    cfg = sandbox.write("sine.yaml", {
        "name": "sine",
        "controllers": {"tracking_enabled": False},
        "profiles": {"base_motion": {"kind": "sine", "components": [{"axis": "y", "amplitude": 0.2,
                                                                     "frequency": 2.0}]}},
        "run": {"duration": 4.0},
    })
    assert main(["run", "--scenario", str(cfg), "--out", "out", "--quiet"]) == EXIT_OK
    csv_path = sandbox / "out" / "sine.csv"
    assert main(["metrics", str(csv_path), "--frequency", "2.0", "--out", "out", "--quiet"]) == EXIT_OK
    text = (sandbox / "out" / "metrics.txt").read_text()
    assert "bmi_yb_to_yp_db" in text and "jitter_pitch_mrad" in text


def test_metrics_missing_file(sandbox):
    assert main(["metrics", "nope.csv", "--out", "out"]) == EXIT_VALIDATION
    assert main(["metrics", "--out", "out"]) == EXIT_VALIDATION


def test_verify_sabotage_fails_bmi(sandbox, capsys):
    cs = design_controllers(Scenario()).to_dict()
    for ch in ("yaw", "pitch"):
        cs["stabilization"][ch]["b"] = [0.0] * len(cs["stabilization"][ch]["b"])
    overlay = sandbox.write("sabotage.yaml", {"controllers": {"designed": cs}})
    assert main(["verify", "--scenario", str(overlay), "--out", "out"]) == EXIT_ACCEPTANCE
    out = capsys.readouterr().out
    assert "[FAIL] 2." in out and "[FAIL] 3." in out
    assert (sandbox / "out" / "acceptance.txt").is_file()


def test_verify_finer_pixels_make_quarter_mrad_detectable(sandbox, capsys):
    # the sensor grows with the finer pixels so the field of view stays the same
    overlay = sandbox.write("fine.yaml", {"camera": {"pixel_scale": 0.1, "width": 3200, "height": 2400}})
    assert main(["verify", "--scenario", str(overlay)]) == EXIT_OK
    line = next(ln for ln in capsys.readouterr().out.splitlines() if ln.startswith("[PASS] 6."))
    assert "0.25 mrad -> response" in line
    assert not (sandbox / "ispsim-out").exists()


def test_verify_missing_overlay(sandbox):
    assert main(["verify", "--scenario", "missing.yaml"]) == EXIT_VALIDATION


def test_run_bundle_writes_summary(sandbox):
    assert main(["run", "--out", "out", "--quiet"]) == EXIT_OK
    out = sandbox / "out"
    for name in ("step_yaw", "step_pitch", "bmi_worstcase", "static_jitter", "dynamic_jitter", "moon_track"):
        assert (out / f"{name}.csv").is_file()
    rows = (out / "summary.csv").read_text().splitlines()
    assert rows[0] == "metric,pitch,yaw"
    assert [r.split(",")[0] for r in rows[1:]] == [
        "bmi_aligned_db", "bmi_cross_db", "max_track_overshoot_mrad", "jitter_mrad_static", "jitter_mrad_dynamic"]
    assert os.path.getsize(out / "summary.txt") > 0
