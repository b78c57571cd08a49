import math

import numpy as np
import pytest

from ispsim.dynamics import GimbalModel, SimulationDivergence
from ispsim.frames import GimbalAngles, euler_dcm
from ispsim.metrics import bmi, step_metrics
from ispsim.profiles import BaseMotionProfile, SineComponent, TargetProfile
from ispsim.scenario import CommandProfile, RateCommandProfile, Scenario
from ispsim.sensing import GyroModel
from ispsim.simulation import CSV_COLUMNS, EXTRA_COLUMNS, TelemetryLog, run_scenario
from ispsim.tracking import CameraModel

QUIET_GYRO = GyroModel(noise_std=0.0, bias=0.0)


@pytest.fixture(scope="module")
def short_noisy_run(default_controllers):
    sc = Scenario(name="noisy", duration=0.5, seed=11,
                  base_motion=BaseMotionProfile("sine", [SineComponent("y", 0.2, 3.0)]))
    return sc, run_scenario(sc, default_controllers)


def test_zero_scenario_logs_zeros(default_controllers):
    log = run_scenario(Scenario(duration=1.0, gyro=QUIET_GYRO), default_controllers)
    for name in CSV_COLUMNS + EXTRA_COLUMNS:
        if name == "t":
            continue
        expected = 1.0 if name == "detect" else 0.0
        assert np.all(log[name] == expected), name


def test_columns_and_spacing(short_noisy_run):
    sc, log = short_noisy_run
    assert set(CSV_COLUMNS) <= set(log.columns)
    assert len({len(v) for v in log.columns.values()}) == 1
    np.testing.assert_allclose(np.diff(log["t"]), sc.log_period, rtol=1e-9)
    assert len(log) == 500


def test_decimated_logging(default_controllers):
    log = run_scenario(Scenario(duration=0.5, log_period=0.01), default_controllers)
    assert len(log) == 50
    np.testing.assert_allclose(np.diff(log["t"]), 0.01)


def test_deterministic_csv(short_noisy_run, default_controllers):
    sc, log = short_noisy_run
    assert run_scenario(sc, default_controllers).to_csv() == log.to_csv()
    assert run_scenario(sc.replace(seed=12), default_controllers).to_csv() != log.to_csv()


def test_csv_round_trip(short_noisy_run, tmp_path):
    _, log = short_noisy_run
    p = tmp_path / "log.csv"
    text = log.to_csv(p)
    assert text.splitlines()[0].startswith("# ispsim telemetry v")
    assert text.splitlines()[1].split(",")[: len(CSV_COLUMNS)] == list(CSV_COLUMNS)
    back = TelemetryLog.from_csv(p)
    for name in CSV_COLUMNS:
        np.testing.assert_array_equal(back[name], log[name])


@pytest.mark.parametrize("psi_deg, theta_deg", [(0.0, 0.0), (-45.0, 45.0)])
def test_open_loop_follows_base_rate(psi_deg, theta_deg, default_controllers):
    wb = BaseMotionProfile("multisine", [SineComponent("y", 0.5, 1.5), SineComponent("z", 0.3, 2.5, 0.4)])
    sc = Scenario(duration=3.0, stabilization_enabled=False, tracking_enabled=False, base_motion=wb,
                  gimbal=GimbalModel(lock_joints=True), psi0=math.radians(psi_deg), theta0=math.radians(theta_deg))
    log = run_scenario(sc, default_controllers)
    L = euler_dcm(GimbalAngles(sc.psi0, sc.theta0))["L_PB"]
    wp = np.column_stack([log["wp_x"], log["wp_y"], log["wp_z"]])
    wbs = np.column_stack([log["wb_x"], log["wb_y"], log["wb_z"]])
    np.testing.assert_allclose(wp, wbs @ L.T, atol=1e-12)
    assert np.all(log["v_yaw"] == 0) and np.all(log["v_pitch"] == 0)


def test_open_loop_is_zero_db(default_controllers):
    sc = Scenario(duration=4.0, stabilization_enabled=False, tracking_enabled=False,
                  gimbal=GimbalModel(lock_joints=True),
                  base_motion=BaseMotionProfile("sine", [SineComponent("y", 28.93 * math.pi / 180, 1.5)]))
    r = bmi(run_scenario(sc, default_controllers), "y", "y", t_start=1.0)
    assert r.bmi_db == pytest.approx(0.0, abs=0.01)


def test_stabilisation_isolates_base_motion(default_controllers):
    sc = Scenario(duration=4.0, tracking_enabled=False,
                  base_motion=BaseMotionProfile("sine", [SineComponent("y", 0.05, 5.0)]))
    r = bmi(run_scenario(sc, default_controllers), "y", "y", t_start=1.0)
    assert r.bmi_db < -20.0


def test_rate_command_is_followed(default_controllers):
    sc = Scenario(duration=1.0, gyro=QUIET_GYRO,
                  rate_command=RateCommandProfile(True, yaw=0.02, pitch=-0.01, step_time=0.1))
    log = run_scenario(sc, default_controllers)
    assert log["wp_z"][-1] == pytest.approx(0.02, rel=0.02)
    assert log["wp_y"][-1] == pytest.approx(-0.01, rel=0.02)


def test_tracking_step_amplitude_invariance(default_controllers):
    # fine pixels on a wide sensor keep quantisation out of the way so the loop is linear
    over = []
    for amp in (2.0, 4.0):
        cam = CameraModel(pixel_scale=0.001, width=20000, height=20000)
        sc = Scenario(duration=4.0, gyro=QUIET_GYRO, camera=cam,
                      command=CommandProfile(yaw_mrad=amp, step_time=0.5))
        over.append(step_metrics(run_scenario(sc, default_controllers), "yaw").overshoot)
    assert over[0] == pytest.approx(over[1], abs=0.5)


def test_target_offset_visible_in_error(default_controllers):
    sc = Scenario(duration=0.2, gyro=QUIET_GYRO, tracking_enabled=False,
                  target=TargetProfile(offset_mrad=(3.0, -2.0)))
    log = run_scenario(sc, default_controllers)
    assert log["yte"][0] == pytest.approx(3.0) and log["pte"][0] == pytest.approx(-2.0)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_raises_with_partial_log(default_controllers):
    bad = BaseMotionProfile("recorded", times=[0.0, 0.05], rates=[[0.0, 0.0, 0.0], [math.inf, 0.0, 0.0]])
    with pytest.raises(SimulationDivergence) as info:
        run_scenario(Scenario(duration=0.2, base_motion=bad), default_controllers)
    exc = info.value
    assert exc.t == pytest.approx(0.05, abs=0.002)
    assert exc.log.failure_time == exc.t
    assert 0 < len(exc.log) <= 51
    assert "# diverged at t=" in exc.log.to_csv()


def test_meta(short_noisy_run):
    _, log = short_noisy_run
    assert log.meta["base_frequency_hz"] == 3.0
    assert log.meta["seed"] == 11
