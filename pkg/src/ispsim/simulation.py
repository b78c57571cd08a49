"""Multirate closed-loop simulation of the stabilised platform.

Each control tick runs, in order: sensors sample, controllers update,
motor torques are set, then the dynamics integrate over the tick with the
torques held. The camera captures every frame period and its result
reaches the tracking loops ``processing_delay`` later.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .actuation import motor_torque
from .dynamics import SimulationDivergence
from .frames import FrameId, GimbalAngles, RateVector, platform_attitude, quat_identity, quat_to_dcm
from .profiles import base_motion, base_motion_with_accel, target_direction
from .scenario import ControllerSet, Scenario, build_cascade
from .sensing import gyro_sample, pot_sample, sensor_stream
from .tracking import CameraPipeline, TrackingError, _errors_from_platform_vector, pixel_to_error

__all__ = ["TelemetryLog", "CSV_COLUMNS", "EXTRA_COLUMNS", "run_scenario", "base_motion", "target_direction"]

CSV_VERSION = 1
CSV_COLUMNS = (
    "t", "psi", "theta", "wb_x", "wb_y", "wb_z", "wp_x", "wp_y", "wp_z",
    "ytc", "yte", "ptc", "pte", "rate_cmd_y", "rate_cmd_z", "v_yaw", "v_pitch", "detect",
)
EXTRA_COLUMNS = (
    "psi_meas", "theta_meas", "wg_x", "wg_y", "wg_z", "gyro_y", "gyro_z", "yte_meas", "pte_meas",
)


@dataclass
class TelemetryLog:
    """Uniformly sampled record of a run.

    Angles in rad, rates in rad/s, tracking command/error (``ytc``, ``yte``,
    ``ptc``, ``pte``) in mrad, voltages in V. ``yte``/``pte`` are the true
    pointing errors; ``*_meas`` are what the tracking loops last received.
    """

    columns: dict
    meta: dict = field(default_factory=dict)
    failure_time: float | None = None

    def __getitem__(self, key) -> np.ndarray:
        return self.columns[key]

    def __len__(self):
        return len(self.columns["t"])

    @property
    def log_period(self) -> float:
        return float(self.meta.get("log_period", self.columns["t"][1] - self.columns["t"][0]))

    def to_csv(self, path=None) -> str:
        """Serialise with a versioned header line; returns the text as well."""
        names = CSV_COLUMNS + EXTRA_COLUMNS
        buf = io.StringIO()
        buf.write(f"# ispsim telemetry v{CSV_VERSION}\n")
        if self.failure_time is not None:
            buf.write(f"# diverged at t={self.failure_time!r}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        cols = [self.columns[n] for n in names]
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "TelemetryLog":
        lines = Path(path).read_text().splitlines()
        failure = None
        body = []
        for ln in lines:
            if ln.startswith("# diverged at t="):
                failure = float(ln.split("=", 1)[1])
            elif not ln.startswith("#"):
                body.append(ln)
        reader = csv.reader(body)
        header = next(reader)
        data = np.array([[float(v) for v in r] for r in reader]).reshape(-1, len(header))
        cols = {n: data[:, i] for i, n in enumerate(header)}
        meta = {"log_period": float(cols["t"][1] - cols["t"][0])} if len(data) > 1 else {}
        return cls(cols, meta, failure)


def _rates(psi, theta, psi_dot, theta_dot, wb):
    cp, sp = math.cos(psi), math.sin(psi)
    ct, st = math.cos(theta), math.sin(theta)
    wgx = cp * wb[0] + sp * wb[1]
    wgy = -sp * wb[0] + cp * wb[1]
    wgz = wb[2] + psi_dot
    return (wgx, wgy, wgz), (ct * wgx - st * wgz, wgy + theta_dot, st * wgx + ct * wgz)


def _target_in_platform(x, d):
    """Target direction ``d`` (inertial) in platform coordinates."""
    q = x[4:8]
    R = quat_to_dcm(q)  # base -> inertial
    vb = R.T @ d
    cp, sp = math.cos(x[0]), math.sin(x[0])
    ct, st = math.cos(x[1]), math.sin(x[1])
    gx = cp * vb[0] + sp * vb[1]
    gy = -sp * vb[0] + cp * vb[1]
    gz = vb[2]
    return ct * gx - st * gz, gy, st * gx + ct * gz


def _ticks(period, tick):
    return max(1, round(period / tick))


def run_scenario(sc: Scenario, controllers: ControllerSet | None = None) -> TelemetryLog:
    """Simulate ``sc`` and return its telemetry.

    Raises
    ------
    SimulationDivergence
        When any state or signal becomes non-finite; the exception carries
        the partial log as ``exc.log``.
    """
    Ts = sc.control_period
    n_sub = _ticks(Ts, sc.dt)
    h = Ts / n_sub
    n_ticks = int(round(sc.duration / Ts))
    log_every = _ticks(sc.log_period, Ts)
    gyro_every = _ticks(1.0 / sc.gyro.sample_rate, Ts)

    model = sc.gimbal
    cascade = build_cascade(sc, controllers)
    camera = CameraPipeline(sc.camera, Ts)
    rng_gyro = sensor_stream(sc.seed, "gyro")
    rng_pot_yaw = sensor_stream(sc.seed, "pot_yaw")
    rng_pot_pitch = sensor_stream(sc.seed, "pot_pitch")

    profile = sc.base_motion

    def base_fn(t):
        return base_motion_with_accel(profile, t)

    x = [sc.psi0, sc.theta0, 0.0, 0.0] + list(quat_identity())
    q_p0 = platform_attitude(quat_identity(), GimbalAngles(sc.psi0, sc.theta0))
    los0 = quat_to_dcm(q_p0)[:, 0]
    off_y, off_p = sc.target.offset_mrad

    names = CSV_COLUMNS + EXTRA_COLUMNS
    n_log = (n_ticks + log_every - 1) // log_every
    buf = {n: np.zeros(n_log) for n in names}

    gyro = RateVector(0.0, 0.0, 0.0, FrameId.PLATFORM)
    meas_err = TrackingError(0.0, 0.0)
    detect = 1.0
    v_yaw = v_pitch = 0.0
    j = 0
    try:
        for k in range(n_ticks):
            t = k * Ts
            wb, _ = base_fn(t)
            wg, wp = _rates(x[0], x[1], x[2], x[3], wb)

            # sensors
            if k % gyro_every == 0:
                gyro = gyro_sample(RateVector(*wp, FrameId.PLATFORM), sc.gyro, rng_gyro)
            psi_m = pot_sample(x[0], sc.pot, rng_pot_yaw)
            theta_m = pot_sample(x[1], sc.pot, rng_pot_pitch)
            tgt = target_direction(sc.target, t, los0)
            true_off = _errors_from_platform_vector(*_target_in_platform(x, tgt))
            if not true_off.lost:
                true_off = TrackingError(true_off.yaw_error + off_y, true_off.pitch_error + off_p)
            ytc, ptc = sc.command.at(t)
            if camera.is_frame(k):
                camera.capture(k, true_off)
            fresh, px = camera.poll(k)

            # controllers
            track_in = None
            if fresh:
                detect = 0.0 if px is None else 1.0
                if px is not None:
                    seen = pixel_to_error(px, sc.camera)
                    meas_err = TrackingError(ytc + seen.yaw_error, ptc + seen.pitch_error)
                    track_in = meas_err
            if sc.rate_command.enabled:
                override = sc.rate_command.at(t)
            elif not sc.tracking_enabled:
                override = (0.0, 0.0)
            else:
                override = None
            v_yaw, v_pitch = cascade.update(track_in, gyro, override)

            # motors
            T_pitch = motor_torque(v_pitch, x[3], sc.motor_pitch)
            T_yaw = motor_torque(v_yaw, x[2], sc.motor_yaw)

            if k % log_every == 0:
                row = (
                    t, x[0], x[1], wb[0], wb[1], wb[2], wp[0], wp[1], wp[2],
                    ytc, ytc + true_off.yaw_error, ptc, ptc + true_off.pitch_error,
                    cascade.rate_cmd_pitch, cascade.rate_cmd_yaw, v_yaw, v_pitch, detect,
                    psi_m, theta_m, wg[0], wg[1], wg[2], gyro.y, gyro.z, meas_err.yaw_error, meas_err.pitch_error,
                )
                for n, v in zip(names, row):
                    buf[n][j] = v
                j += 1

            # dynamics
            for s in range(n_sub):
                x = model.step(t + s * h, x, T_pitch, T_yaw, base_fn, h)
    except (SimulationDivergence, ValueError) as exc:
        t_fail = getattr(exc, "t", k * Ts)
        partial = TelemetryLog({n: buf[n][:j] for n in names}, _meta(sc), failure_time=t_fail)
        err = SimulationDivergence(t_fail, f"simulation diverged at t = {t_fail:.6f} s: {exc}")
        err.log = partial
        raise err from exc

    return TelemetryLog(buf, _meta(sc))


def _meta(sc: Scenario) -> dict:
    return {
        "scenario": sc.name,
        "seed": sc.seed,
        "log_period": sc.log_period,
        "base_frequency_hz": sc.base_motion.fundamental_hz,
        "step_time": sc.command.step_time,
        "duration": sc.duration,
    }
