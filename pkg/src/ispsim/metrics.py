"""Performance figures computed from telemetry logs.

All functions are pure: they read a :class:`~ispsim.simulation.TelemetryLog`
(or anything indexable by column name) and return plain values.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

__all__ = [
    "IsolationResult",
    "StepMetrics",
    "MetricsError",
    "bmi_db",
    "bmi",
    "cycle_amplitudes",
    "jitter",
    "step_metrics",
    "summary_table",
    "format_summary",
    "summary_csv",
]

_RATE_COLUMNS = {"x": "wp_x", "y": "wp_y", "z": "wp_z"}
_BASE_COLUMNS = {"x": "wb_x", "y": "wb_y", "z": "wb_z"}
_CHANNELS = {"yaw": ("ytc", "yte"), "pitch": ("ptc", "pte")}


class MetricsError(ValueError):
    """Raised when a log cannot support the requested metric."""


@dataclass(frozen=True)
class IsolationResult:
    """Base-motion isolation at one frequency.

    Attributes
    ----------
    bmi_db : float
        ``20 log10(response / disturbance)``.
    disturbance_amplitude, response_amplitude : float
        Estimated amplitudes in rad/s.
    cycles : int
        Number of whole disturbance cycles used.
    """

    bmi_db: float
    disturbance_amplitude: float
    response_amplitude: float
    cycles: int

    @property
    def response_dps(self) -> float:
        return math.degrees(self.response_amplitude)


@dataclass(frozen=True)
class StepMetrics:
    overshoot: float  # percent of command
    settling_time: float  # s, 2% band; inf when unsettled
    steady_state_error: float  # mrad

    @property
    def settled(self) -> bool:
        return math.isfinite(self.settling_time)


def bmi_db(disturbance_amplitude: float, response_amplitude: float) -> float:
    """Ratio of response to disturbance amplitude in dB."""
    if disturbance_amplitude <= 0:
        raise MetricsError("disturbance amplitude must be positive")
    if response_amplitude <= 0:
        return -math.inf
    return 20.0 * math.log10(response_amplitude / disturbance_amplitude)


def cycle_amplitudes(t, x, frequency: float, t_start: float = 0.0, estimator: str = "median") -> tuple[float, int]:
    """Amplitude of ``x`` at ``frequency`` over whole cycles after ``t_start``.

    ``median`` takes the median over cycles of half the peak-to-peak swing;
    ``rms`` uses ``sqrt(2)`` times the RMS of the mean-removed window.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if frequency <= 0:
        raise MetricsError("frequency must be positive")
    period = 1.0 / frequency
    n_cycles = int(math.floor((t[-1] - t_start) / period + 1e-9)) if len(t) else 0
    if n_cycles < 3:
        raise MetricsError(f"only {max(n_cycles, 0)} whole cycles after t = {t_start:g} s; need at least 3")
    if estimator == "median":
        amps = []
        for i in range(n_cycles):
            lo = t_start + i * period
            m = (t >= lo - 1e-12) & (t < lo + period - 1e-12)
            seg = x[m]
            amps.append(0.5 * float(seg.max() - seg.min()))
        return float(np.median(amps)), n_cycles
    if estimator == "rms":
        m = (t >= t_start - 1e-12) & (t < t_start + n_cycles * period - 1e-12)
        seg = x[m] - x[m].mean()
        return math.sqrt(2.0) * float(np.sqrt(np.mean(seg ** 2))), n_cycles
    raise MetricsError(f"unknown estimator {estimator!r}")


def bmi(log, dist_axis: str = "y", resp_axis: str = "y", frequency: float | None = None,
        t_start: float = 2.0, estimator: str = "median") -> IsolationResult:
    """Base-motion isolation of platform rate ``resp_axis`` against base rate ``dist_axis``.

    ``frequency`` defaults to the fundamental stored in the log metadata.
    """
    if frequency is None:
        frequency = getattr(log, "meta", {}).get("base_frequency_hz")
        if not frequency:
            raise MetricsError("disturbance frequency unknown; pass frequency=")
    t = log["t"]
    d, n = cycle_amplitudes(t, log[_BASE_COLUMNS[dist_axis]], frequency, t_start, estimator)
    r, _ = cycle_amplitudes(t, log[_RATE_COLUMNS[resp_axis]], frequency, t_start, estimator)
    return IsolationResult(bmi_db(d, r), d, r, n)


def jitter(log, axis: str = "y", t_start: float = 0.0) -> float:
    """Peak LOS angle deviation in mrad from integrated platform rate.

    The rate about ``axis`` is integrated with the trapezoidal rule and the
    mean of the resulting angle is removed.
    """
    t = np.asarray(log["t"], dtype=float)
    w = np.asarray(log[_RATE_COLUMNS[axis]], dtype=float)
    m = t >= t_start
    t, w = t[m], w[m]
    if len(t) < 2:
        return 0.0
    w = w - w.mean()
    ang = cumulative_trapezoid(w, t, initial=0.0)
    ang = ang - ang.mean()
    return 1e3 * float(np.max(np.abs(ang)))


def step_metrics(log, channel: str = "yaw", step_time: float | None = None, band: float = 0.02) -> StepMetrics:
    """Overshoot and settling of the response to a tracking-command step.

    The response is ``command - error`` on the chosen channel. Settling is
    measured from the step to the start of the final stretch in which the
    response stays within ``band`` of the command.
    """
    cmd_col, err_col = _CHANNELS[channel]
    t = np.asarray(log["t"], dtype=float)
    cmd = np.asarray(log[cmd_col], dtype=float)
    resp = cmd - np.asarray(log[err_col], dtype=float)
    jumps = np.nonzero(np.diff(cmd))[0]
    if len(jumps) == 0:
        raise MetricsError(f"no step in the {channel} command")
    k = int(jumps[0]) + 1
    t0 = t[k] if step_time is None else step_time
    c0, c1 = cmd[k - 1], cmd[-1]
    amp = c1 - c0
    after = t >= t0
    y = (resp[after] - c0) / amp
    tt = t[after]
    overshoot = max(0.0, 100.0 * (float(y.max()) - 1.0))
    outside = np.nonzero(np.abs(y - 1.0) > band)[0]
    if len(outside) == 0:
        settling = 0.0
    elif outside[-1] + 1 >= len(y):
        settling = math.inf
    else:
        settling = float(tt[outside[-1] + 1] - t0)
    sse = float(abs(log[err_col][-1]))
    return StepMetrics(overshoot, settling, sse)


def summary_table(bmi_aligned_logs=None, bmi_cross_log=None, step_logs=None,
                  static_log=None, dynamic_log=None, t_start: float = 2.0) -> dict:
    """Performance table: metric -> {"pitch": value, "yaw": value}.

    ``bmi_aligned_logs`` and ``step_logs`` map channel name to log; the
    cross-coupled run supplies pitch from ``y_p`` and yaw from ``z_p``.
    Jitter cells are ``(static, dynamic)`` pairs. Missing inputs give ``nan``.
    """
    nan = math.nan
    rows = {
        "bmi_aligned_db": {"pitch": nan, "yaw": nan},
        "bmi_cross_db": {"pitch": nan, "yaw": nan},
        "max_track_overshoot_mrad": {"pitch": nan, "yaw": nan},
        "jitter_static_dynamic_mrad": {"pitch": (nan, nan), "yaw": (nan, nan)},
    }
    axis = {"pitch": "y", "yaw": "z"}
    for ch, lg in (bmi_aligned_logs or {}).items():
        rows["bmi_aligned_db"][ch] = bmi(lg, axis[ch], axis[ch], t_start=t_start).bmi_db
    if bmi_cross_log is not None:
        rows["bmi_cross_db"]["pitch"] = bmi(bmi_cross_log, "y", "y", t_start=t_start).bmi_db
        rows["bmi_cross_db"]["yaw"] = bmi(bmi_cross_log, "y", "z", t_start=t_start).bmi_db
    for ch, lg in (step_logs or {}).items():
        cmd_col, _ = _CHANNELS[ch]
        amp = abs(float(lg[cmd_col][-1] - lg[cmd_col][0]))
        rows["max_track_overshoot_mrad"][ch] = step_metrics(lg, ch).overshoot * amp / 100.0
    for ch in ("pitch", "yaw"):
        s = jitter(static_log, axis[ch], t_start) if static_log is not None else nan
        d = jitter(dynamic_log, axis[ch], t_start) if dynamic_log is not None else nan
        rows["jitter_static_dynamic_mrad"][ch] = (s, d)
    return rows


def _cell(v) -> str:
    if isinstance(v, tuple):
        return f"{v[0]:.2f} ({v[1]:.2f})"
    return f"{v:.2f}"


def format_summary(rows: dict) -> str:
    """Plain-text rendering of :func:`summary_table`."""
    lines = [f"{'metric':<28}{'pitch':>16}{'yaw':>16}"]
    for name, v in rows.items():
        lines.append(f"{name:<28}{_cell(v['pitch']):>16}{_cell(v['yaw']):>16}")
    return "\n".join(lines)


def summary_csv(rows: dict) -> str:
    """CSV rendering; jitter pairs become two rows."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "pitch", "yaw"])
    for name, v in rows.items():
        if isinstance(v["pitch"], tuple):
            base = name.replace("_static_dynamic", "")
            for i, tag in enumerate(("static", "dynamic")):
                w.writerow([f"{base}_{tag}", repr(float(v["pitch"][i])), repr(float(v["yaw"][i]))])
        else:
            w.writerow([name, repr(float(v["pitch"])), repr(float(v["yaw"]))])
    return buf.getvalue()
