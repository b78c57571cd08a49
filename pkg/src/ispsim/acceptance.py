"""Acceptance suite: each criterion runs a scenario and checks a tolerance.

Every ``criterion_*`` function returns a :class:`CriterionResult`. An
optional ``overlay`` mapping is merged into each bundled scenario file
before it is parsed, which lets callers perturb the whole suite (a coarser
camera, zeroed gains, another seed) without editing the bundled files.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import numpy as np
import yaml
from scipy import signal

from .control import tustin_discretize
from .dynamics import DynamicState, FrictionModel, GimbalModel, system_energy
from .frames import quat_identity
from .metrics import bmi, jitter, step_metrics
from .profiles import TargetProfile
from .scenario import (
    RateCommandProfile,
    Scenario,
    bundled_scenario_path,
    design_controllers,
    scenario_from_dict,
    stabilization_plant,
)
from .sensing import GyroModel
from .simulation import run_scenario
from .tracking import camera_project, TrackingError

__all__ = ["CriterionResult", "CRITERIA", "load_bundled", "merge_config", "run_acceptance", "format_result"]


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    measured: str
    tolerance: str
    passed: bool


def format_result(r: CriterionResult) -> str:
    flag = "PASS" if r.passed else "FAIL"
    return f"[{flag}] {r.number}. {r.name}: {r.measured} (required {r.tolerance})"


def merge_config(base: dict, overlay: dict | None) -> dict:
    """Recursive dict merge; overlay values win, ``base`` is not modified."""
    out = copy.deepcopy(base)
    for k, v in (overlay or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge_config(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_bundled(name: str, overlay: dict | None = None) -> Scenario:
    path = bundled_scenario_path(name)
    data = yaml.safe_load(path.read_text()) or {}
    return scenario_from_dict(merge_config(data, overlay), base_dir=path.parent)


def _within(value, target, tol):
    return abs(value - target) <= tol


# -- 1: step tracking --------------------------------------------------------

def criterion_1(overlay=None) -> CriterionResult:
    log = run_scenario(load_bundled("step_yaw", overlay))
    m = step_metrics(log, "yaw")
    ok = _within(m.overshoot, 8.0, 3.0) and _within(m.settling_time, 1.5, 0.3)
    return CriterionResult(1, "step tracking response",
                           f"overshoot {m.overshoot:.2f} %, settling {m.settling_time:.3f} s",
                           "overshoot 8 +/- 3 %, settling 1.5 +/- 0.3 s", ok)


# -- 2, 3: base-motion isolation ---------------------------------------------

_bmi_cache: dict = {}


def _bmi_log(overlay):
    key = yaml.safe_dump(overlay or {}, sort_keys=True)
    if key not in _bmi_cache:
        _bmi_cache.clear()
        _bmi_cache[key] = run_scenario(load_bundled("bmi_worstcase", overlay))
    return _bmi_cache[key]


def criterion_2(overlay=None) -> CriterionResult:
    r = bmi(_bmi_log(overlay), "y", "y")
    return CriterionResult(2, "aligned BMI (y_p)", f"{r.bmi_db:.2f} dB ({r.response_dps:.3f} deg/s)",
                           "-30.0 +/- 3 dB", _within(r.bmi_db, -30.0, 3.0))


def criterion_3(overlay=None) -> CriterionResult:
    r = bmi(_bmi_log(overlay), "y", "z")
    return CriterionResult(3, "cross-axis coupling (z_p)", f"{r.bmi_db:.2f} dB ({r.response_dps:.3f} deg/s)",
                           "-26.3 +/- 3 dB", _within(r.bmi_db, -26.3, 3.0))


# -- 4: loop shapes ----------------------------------------------------------

def criterion_4(overlay=None) -> CriterionResult:
    sc = load_bundled("step_yaw", overlay)
    designs = design_controllers(sc).designs
    ok = True
    parts = []
    for ch in ("yaw", "pitch"):
        s = designs["stabilization"][ch].analysis
        t = designs["tracking"][ch].analysis
        ok &= 30.4 <= s.bandwidth_hz <= 45.6 and s.resonance_db < 3.0
        ok &= 0.8 <= t.bandwidth_hz <= 1.2 and t.resonance_db < 1.0
        parts.append(f"{ch}: stab {s.bandwidth_hz:.1f} Hz/{s.resonance_db:.2f} dB, "
                     f"track {t.bandwidth_hz:.2f} Hz/{t.resonance_db:.2f} dB")
    return CriterionResult(4, "loop-shape targets", "; ".join(parts),
                           "stab 38 Hz +/- 20 % and < 3 dB; track 1 Hz +/- 20 % and < 1 dB", bool(ok))


# -- 5: jitter ---------------------------------------------------------------

def criterion_5(overlay=None) -> CriterionResult:
    static = run_scenario(load_bundled("static_jitter", overlay))
    dynamic = run_scenario(load_bundled("dynamic_jitter", overlay))
    s = {ax: jitter(static, ax, 2.0) for ax in ("y", "z")}
    d = {ax: jitter(dynamic, ax, 2.0) for ax in ("y", "z")}
    ok = max(s.values()) <= 1.0 and max(d.values()) <= 2.6
    return CriterionResult(5, "jitter",
                           f"static pitch {s['y']:.3f} / yaw {s['z']:.3f} mrad, "
                           f"dynamic pitch {d['y']:.3f} / yaw {d['z']:.3f} mrad",
                           "static <= 1.0 mrad, dynamic <= 2.6 mrad", ok)


# -- 6: tracking resolution floor --------------------------------------------

def _offset_response(sc: Scenario, offset: float) -> float:
    """Largest joint excursion (mrad) caused by a constant target offset."""
    quiet = sc.replace(
        target=TargetProfile(offset_mrad=(offset, offset)),
        gyro=GyroModel(noise_std=0.0, bias=0.0, quantization_step=sc.gyro.quantization_step),
        duration=3.0,
    )
    log = run_scenario(quiet)
    return 1e3 * max(np.max(np.abs(log["psi"] - quiet.psi0)), np.max(np.abs(log["theta"] - quiet.theta0)))


def criterion_6(overlay=None) -> CriterionResult:
    sc = load_bundled("static_jitter", overlay)
    ok = True
    parts = []
    for offset in (0.25, 0.5):
        px = camera_project(TrackingError(offset, offset), sc.camera)
        predicted = px is not None and (px.u != 0.0 or px.v != 0.0)
        moved = _offset_response(sc, offset)
        responded = moved > 1e-3
        ok &= responded == predicted
        parts.append(f"{offset} mrad -> {'response' if responded else 'no response'} "
                     f"({moved:.3f} mrad; predicted {'response' if predicted else 'none'})")
    tol = f"response exactly when the offset rounds to a non-zero pixel at {sc.camera.pixel_scale} mrad/px"
    return CriterionResult(6, "tracking resolution floor", "; ".join(parts), tol, bool(ok))


# -- 7: physics oracle -------------------------------------------------------

def _free_model():
    off = FrictionModel(0.0, 0.0, 0.01)
    return GimbalModel(friction_pitch=off, friction_yaw=off)


def _fixed_base(t):
    return (0.0, 0.0, 0.0), (0.0, 0.0, 0.0)


def _free_run(model, dt, duration, x0):
    x = list(x0)
    for k in range(int(round(duration / dt))):
        x = model.step(k * dt, x, 0.0, 0.0, _fixed_base, dt)
    return np.asarray(x)


def criterion_7(overlay=None) -> CriterionResult:
    model = _free_model()
    x0 = [0.0, 0.3, 2.0, 1.5] + list(quat_identity())

    def energy(x):
        return system_energy(DynamicState.from_vector(x), model.inertia_p, model.inertia_g)

    x = _free_run(model, 1e-3, 10.0, x0)
    drift = abs(energy(x) - energy(x0)) / energy(x0)

    ref = _free_run(model, 1e-4, 1.0, x0)

    def err(dt):
        y = _free_run(model, dt, 1.0, x0)
        d = [math.remainder(y[0] - ref[0], 2 * math.pi), math.remainder(y[1] - ref[1], 2 * math.pi),
             y[2] - ref[2], y[3] - ref[3]]
        return float(np.linalg.norm(d))

    ratio = err(0.02) / err(0.01)
    ok = drift <= 1e-6 and 13.0 <= ratio <= 19.0
    return CriterionResult(7, "physics oracle", f"energy drift {drift:.2e}, RK4 halving ratio {ratio:.2f}",
                           "drift <= 1e-6, ratio ~16 (13 to 19)", ok)


# -- 8: discretisation oracle ------------------------------------------------

def _sampled_closed_loop_step(plant, ctrl, Ts, n):
    """Unit step of the loop closed around the ZOH-sampled plant."""
    pn, pd, _ = signal.cont2discrete((plant.num, plant.den), Ts, "zoh")
    pn = np.trim_zeros(np.ravel(pn), "f")
    ln = np.polymul(ctrl.b, pn)
    ld = np.polymul(ctrl.a, np.ravel(pd))
    k = max(len(ln), len(ld))
    ln = np.pad(ln, (k - len(ln), 0))
    ld = np.pad(ld, (k - len(ld), 0))
    return signal.lfilter(ln, ln + ld, np.ones(n))


def criterion_8(overlay=None) -> CriterionResult:
    base = load_bundled("step_yaw", overlay)
    cs = design_controllers(base)
    Ts = base.control_period
    frame = 1.0 / base.camera.frame_rate

    # DC gain of the finite-DC tracking controllers; integrators keep a pole at z = 1
    dc_err = 0.0
    for ch in ("yaw", "pitch"):
        d = cs.designs["tracking"][ch]
        dc_err = max(dc_err, abs(tustin_discretize(d.controller, frame).dc_gain() - d.controller.dc_gain()))
    integ_ok = all(abs(np.polyval(cs.stabilization[ch].a, 1.0)) < 1e-12 for ch in ("yaw", "pitch"))

    # magnitude up to Nyquist/5
    mag_err = 0.0
    for role, period in (("stabilization", Ts), ("tracking", frame)):
        for ch in ("yaw", "pitch"):
            tf = cs.designs[role][ch].controller
            f = np.linspace(0.01, 0.1 / period, 400)
            hd = np.abs(tustin_discretize(tf, period).frequency_response(f))
            hc = np.abs(tf(2j * np.pi * f))
            mag_err = max(mag_err, float(np.max(np.abs(hd / hc - 1.0))))

    # noise-free small-signal rate step through the full simulator
    off = FrictionModel(base.gimbal.friction_pitch.viscous_coeff, 0.0, 0.01)
    sc = base.replace(
        gimbal=GimbalModel(base.gimbal.inertia_p, base.gimbal.inertia_g, off, off),
        gyro=GyroModel(noise_std=0.0, bias=0.0, quantization_step=0.0),
        rate_command=RateCommandProfile(True, yaw=0.01, pitch=0.01, step_time=0.1),
        command=type(base.command)(),
        duration=0.4,
        log_period=Ts,
        psi0=0.0,
        theta0=0.0,
    )
    log = run_scenario(sc, cs)
    m = log["t"] >= 0.1 - 1e-12
    g = sc.gimbal
    step_err = 0.0
    for ch, col, J, motor in (("pitch", "wp_y", g.inertia_p.Iyy, sc.motor_pitch),
                              ("yaw", "wp_z", g.inertia_g.Izz + g.inertia_p.Izz, sc.motor_yaw)):
        plant = stabilization_plant(J, motor, off.viscous_coeff)
        y = _sampled_closed_loop_step(plant, cs.stabilization[ch], Ts, int(m.sum()))
        step_err = max(step_err, float(np.max(np.abs(log[col][m] / 0.01 - y))))

    ok = dc_err <= 1e-9 and integ_ok and mag_err <= 0.05 and step_err <= 0.02
    return CriterionResult(8, "discretisation oracle",
                           f"DC error {dc_err:.1e}, magnitude error {100 * mag_err:.2f} %, "
                           f"closed-loop step error {100 * step_err:.3f} %",
                           "DC exact, magnitude within 5 % to Nyquist/5, step within 2 %", ok)


# -- 9: determinism ----------------------------------------------------------

def criterion_9(overlay=None) -> CriterionResult:
    sc = load_bundled("static_jitter", overlay).replace(duration=2.0)
    a = run_scenario(sc).to_csv()
    b = run_scenario(sc).to_csv()
    return CriterionResult(9, "determinism", "identical" if a == b else "CSV differs",
                           "byte-identical telemetry for identical seeds", a == b)


CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9,
}


def run_acceptance(overlay: dict | None = None, numbers=None) -> list[CriterionResult]:
    """Run the selected criteria (all by default) in order."""
    return [CRITERIA[n](overlay) for n in sorted(numbers or CRITERIA)]
