"""Classical loop design, Bode analysis and difference-equation controllers.

Continuous controllers have the form

    C(s) = Kp * (1 + wi/s) * 1/(s/p + 1)

(the integral term only for PI, the lag only when a pole is given). They
are tuned on a rational plant model, checked in the frequency domain, and
discretised with the bilinear (Tustin) substitution
``s = (2/Ts)(z - 1)/(z + 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

__all__ = [
    "TransferFunction",
    "FrequencyResponse",
    "LoopAnalysis",
    "LoopSpec",
    "LoopDesign",
    "DesignError",
    "DiscreteController",
    "pade",
    "frequency_response",
    "bandwidth_hz",
    "resonance_peak_db",
    "analyze_loop",
    "design_loop",
    "tustin_discretize",
    "CascadeController",
    "cascade_update",
]

TWO_PI = 2.0 * math.pi


class DesignError(ValueError):
    """A loop specification cannot be met."""


def _trim(p) -> np.ndarray:
    p = np.atleast_1d(np.asarray(p, dtype=float))
    nz = np.flatnonzero(p)
    return p[nz[0]:] if nz.size else np.zeros(1)


class TransferFunction:
    """Rational transfer function in ``s``; coefficients highest degree first."""

    def __init__(self, num, den):
        self.num = _trim(num)
        self.den = _trim(den)
        if not np.any(self.den):
            raise ValueError("denominator is identically zero")
        if len(self.num) > len(self.den):
            raise ValueError("transfer function must be proper")

    def __call__(self, s):
        return np.polyval(self.num, s) / np.polyval(self.den, s)

    def __mul__(self, other):
        if isinstance(other, TransferFunction):
            return TransferFunction(np.polymul(self.num, other.num), np.polymul(self.den, other.den))
        return TransferFunction(self.num * float(other), self.den)

    __rmul__ = __mul__

    def feedback(self) -> "TransferFunction":
        """Unity negative feedback closure ``L / (1 + L)``."""
        return TransferFunction(self.num, np.polyadd(self.den, self.num))

    def sensitivity(self) -> "TransferFunction":
        """``1 / (1 + L)``."""
        return TransferFunction(self.den, np.polyadd(self.den, self.num))

    def poles(self) -> np.ndarray:
        return np.roots(self.den)

    def dc_gain(self) -> float:
        d = self.den[-1]
        return math.inf if d == 0 else float(self.num[-1] / d)

    def __repr__(self):
        return f"TransferFunction(num={self.num.tolist()}, den={self.den.tolist()})"


def pade(delay: float, order: int = 2) -> TransferFunction:
    """Pade approximation of a pure delay ``exp(-s * delay)``."""
    if delay == 0:
        return TransferFunction([1.0], [1.0])
    T = delay
    if order == 1:
        return TransferFunction([-T / 2, 1.0], [T / 2, 1.0])
    if order == 2:
        return TransferFunction([T * T / 12, -T / 2, 1.0], [T * T / 12, T / 2, 1.0])
    raise ValueError("only first and second order Pade approximations are provided")


@dataclass
class FrequencyResponse:
    freqs_hz: np.ndarray
    mag_db: np.ndarray
    phase_deg: np.ndarray


def frequency_response(tf: TransferFunction, freqs_hz) -> FrequencyResponse:
    """Magnitude (dB) and unwrapped phase (deg) of ``tf`` at ``s = j 2 pi f``."""
    f = np.asarray(freqs_hz, dtype=float)
    if np.any(f <= 0):
        raise ValueError("frequencies must be positive")
    h = tf(1j * TWO_PI * f)
    mag = 20.0 * np.log10(np.abs(h))
    phase = np.degrees(np.unwrap(np.angle(h)))
    return FrequencyResponse(f, mag, phase)


_GRID = np.logspace(-4, 5, 3601)
_HALF_POWER_DB = 10.0 * math.log10(0.5)


def _mag_db(tf, f):
    return 20.0 * math.log10(abs(tf(1j * TWO_PI * f)))


def _low_freq_db(tf) -> float:
    g = tf.dc_gain()
    if not math.isfinite(g) or g == 0:
        raise ValueError("bandwidth is undefined for a transfer function without finite, nonzero DC gain")
    return 20.0 * math.log10(abs(g))


def bandwidth_hz(tf: TransferFunction) -> float:
    """First frequency where the gain falls to half power (-3.01 dB) of its DC value."""
    ref = _low_freq_db(tf) + _HALF_POWER_DB
    mags = frequency_response(tf, _GRID).mag_db - ref
    below = np.flatnonzero(mags < 0)
    if below.size == 0:
        return math.inf
    i = below[0]
    if i == 0:
        return float(_GRID[0])
    return 10 ** brentq(lambda lf: _mag_db(tf, 10 ** lf) - ref, math.log10(_GRID[i - 1]), math.log10(_GRID[i]))


def resonance_peak_db(tf: TransferFunction) -> float:
    """Peak gain above the DC gain (dB); zero when the response never rises."""
    ref = _low_freq_db(tf)
    mags = frequency_response(tf, _GRID).mag_db
    i = int(np.argmax(mags))
    lo, hi = math.log10(_GRID[max(i - 1, 0)]), math.log10(_GRID[min(i + 1, len(_GRID) - 1)])
    res = minimize_scalar(lambda lf: -_mag_db(tf, 10 ** lf), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10})
    return max(0.0, max(-res.fun, mags[i]) - ref)


@dataclass
class LoopAnalysis:
    """Open-loop margins and closed-loop shape of a feedback loop."""

    crossover_hz: float
    phase_margin_deg: float
    phase_crossover_hz: float
    gain_margin_db: float
    bandwidth_hz: float
    resonance_db: float
    stable: bool


def analyze_loop(L: TransferFunction) -> LoopAnalysis:
    """Margins from the open loop ``L``; bandwidth/resonance of ``L/(1+L)``.

    Crossings are located on a log-spaced scan and refined by bisection.
    Missing crossings are reported as unbounded margins.
    """
    fr = frequency_response(L, _GRID)
    lg = np.log10(_GRID)

    def phase_at(f):
        # continue the unwrapped phase branch from the nearest grid point
        k = int(np.clip(np.searchsorted(_GRID, f), 0, len(_GRID) - 1))
        p = math.degrees(np.angle(L(1j * TWO_PI * f)))
        return p + 360.0 * round((fr.phase_deg[k] - p) / 360.0)

    wc, pm = math.nan, math.inf
    down = np.flatnonzero((fr.mag_db[:-1] >= 0) & (fr.mag_db[1:] < 0))
    if down.size:
        i = down[-1]
        wc = 10 ** brentq(lambda x: _mag_db(L, 10 ** x), lg[i], lg[i + 1])
        pm = 180.0 + phase_at(wc)

    fp, gm = math.nan, math.inf
    shifted = fr.phase_deg + 180.0
    cross = np.flatnonzero(np.sign(shifted[:-1]) * np.sign(shifted[1:]) < 0)
    if cross.size:
        i = cross[0]
        fp = 10 ** brentq(lambda x: phase_at(10 ** x) + 180.0, lg[i], lg[i + 1])
        gm = -_mag_db(L, fp)

    T = L.feedback()
    stable = bool(np.all(np.real(T.poles()) < 0))
    return LoopAnalysis(wc, pm, fp, gm, bandwidth_hz(T), resonance_peak_db(T), stable)


@dataclass(frozen=True)
class LoopSpec:
    """Loop-shaping targets for one controller.

    ``crossover_hz`` sets the open-loop 0 dB crossing used to solve the
    proportional gain (defaults to ``bandwidth_hz``). The design is then
    accepted only if the closed-loop bandwidth lies within
    ``bandwidth_tol`` of ``bandwidth_hz`` and the resonance peak is under
    ``resonance_limit_db``.
    """

    bandwidth_hz: float
    resonance_limit_db: float = 3.0
    pole_hz: float | None = None
    form: str = "P"
    crossover_hz: float | None = None
    bandwidth_tol: float = 0.2
    integral_ratio: float = 0.1

    def __post_init__(self):
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth must be positive")
        if self.resonance_limit_db <= 0:
            raise ValueError("resonance limit must be positive")
        if self.form not in ("P", "PI"):
            raise ValueError(f"unknown controller form {self.form!r}")

    @property
    def target_crossover_hz(self) -> float:
        return self.crossover_hz or self.bandwidth_hz


@dataclass
class LoopDesign:
    controller: TransferFunction
    kp: float
    ki: float
    analysis: LoopAnalysis
    iterations: int

    def report(self) -> dict:
        a = self.analysis
        vals = {
            "kp": self.kp,
            "ki": self.ki,
            "crossover_hz": a.crossover_hz,
            "phase_margin_deg": a.phase_margin_deg,
            "gain_margin_db": a.gain_margin_db,
            "bandwidth_hz": a.bandwidth_hz,
            "resonance_db": a.resonance_db,
            "iterations": self.iterations,
        }
        return {k: (int(v) if k == "iterations" else float(v)) for k, v in vals.items()}


def _controller_tf(kp, ki, pole_hz):
    if ki:
        c = TransferFunction([kp, kp * ki], [1.0, 0.0])
    else:
        c = TransferFunction([kp], [1.0])
    if pole_hz:
        c = c * TransferFunction([1.0], [1.0 / (TWO_PI * pole_hz), 1.0])
    return c


def design_loop(plant: TransferFunction, spec: LoopSpec, max_iter: int = 10) -> LoopDesign:
    """Tune a P or PI controller with a lag pole against ``plant``.

    The integral corner is placed ``integral_ratio`` times the crossover.
    The proportional gain puts the open-loop 0 dB crossing at the target
    crossover; it is then backed off by 10 % per iteration while the
    resonance limit is exceeded.

    Raises
    ------
    DesignError
        If the loop has no genuine crossover, is unstable, or misses the
        bandwidth/resonance targets within ``max_iter`` back-offs.
    """
    wc = TWO_PI * spec.target_crossover_hz
    ki = spec.integral_ratio * wc if spec.form == "PI" else 0.0
    shape = _controller_tf(1.0, ki, spec.pole_hz) * plant
    g = abs(shape(1j * wc))
    if not (math.isfinite(g) and g > 0):
        raise DesignError("plant gain at the crossover is zero or infinite")
    kp = 1.0 / g
    # the magnitude must actually fall through 0 dB at the crossover
    if not (kp * abs(shape(0.5j * wc)) > 1.0 and kp * abs(shape(2j * wc)) < 1.0):
        raise DesignError(
            f"no 0 dB crossover near {spec.target_crossover_hz:g} Hz: loop magnitude is flat or rising"
        )
    lo, hi = spec.bandwidth_hz * (1 - spec.bandwidth_tol), spec.bandwidth_hz * (1 + spec.bandwidth_tol)
    for it in range(max_iter + 1):
        L = shape * kp
        a = analyze_loop(L)
        if not a.stable:
            raise DesignError(f"closed loop unstable at kp={kp:.6g}")
        if a.resonance_db < spec.resonance_limit_db:
            if not lo <= a.bandwidth_hz <= hi:
                raise DesignError(
                    f"closed-loop bandwidth {a.bandwidth_hz:.4g} Hz outside [{lo:.4g}, {hi:.4g}] Hz"
                )
            return LoopDesign(_controller_tf(kp, ki, spec.pole_hz), kp, ki, a, it)
        kp *= 0.9
    raise DesignError(
        f"resonance {a.resonance_db:.3g} dB still above {spec.resonance_limit_db:g} dB after {max_iter} back-offs"
    )


@dataclass
class DiscreteController:
    """Difference equation ``sum a_i y[k-i] = sum b_i u[k-i]`` with ``a_0 = 1``.

    The output is clamped to ``[u_min, u_max]``. With ``anti_windup`` the
    clamped value, not the raw one, is written back into the output history
    (back-calculation), so the internal state never runs away.
    """

    b: np.ndarray
    a: np.ndarray
    sample_period: float
    u_min: float = -math.inf
    u_max: float = math.inf
    anti_windup: bool = True
    _x: list = field(default=None, repr=False)
    _y: list = field(default=None, repr=False)

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)
        self.a = np.asarray(self.a, dtype=float)
        if self.sample_period <= 0:
            raise ValueError("sample period must be positive")
        if self.a[0] != 1.0:
            raise ValueError("coefficients must be normalised so that a[0] == 1")
        if self.u_min > self.u_max:
            raise ValueError("u_min exceeds u_max")
        self.reset()

    def reset(self):
        self._x = [0.0] * len(self.b)
        self._y = [0.0] * (len(self.a) - 1)
        self._bl = [float(v) for v in self.b]
        self._al = [float(v) for v in self.a[1:]]

    def update(self, u: float) -> float:
        if not math.isfinite(u):
            raise ValueError(f"non-finite controller input {u!r}")
        x = self._x
        x.insert(0, float(u))
        x.pop()
        y = sum(bi * xi for bi, xi in zip(self._bl, x)) - sum(ai * yi for ai, yi in zip(self._al, self._y))
        out = min(max(y, self.u_min), self.u_max)
        if self._y:
            self._y.insert(0, out if self.anti_windup else y)
            self._y.pop()
        return out

    def dc_gain(self) -> float:
        return float(np.sum(self.b) / np.sum(self.a))

    def frequency_response(self, freqs_hz) -> np.ndarray:
        """Complex response at ``z = exp(j 2 pi f Ts)``."""
        zi = np.exp(-1j * TWO_PI * np.asarray(freqs_hz, dtype=float) * self.sample_period)
        return np.polyval(self.b[::-1], zi) / np.polyval(self.a[::-1], zi)

    def to_dict(self) -> dict:
        return {
            "b": [float(v) for v in self.b],
            "a": [float(v) for v in self.a],
            "sample_period": self.sample_period,
            "u_min": self.u_min,
            "u_max": self.u_max,
            "anti_windup": self.anti_windup,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DiscreteController":
        return cls(
            b=d["b"],
            a=d["a"],
            sample_period=float(d["sample_period"]),
            u_min=float(d.get("u_min", -math.inf)),
            u_max=float(d.get("u_max", math.inf)),
            anti_windup=bool(d.get("anti_windup", True)),
        )


def tustin_discretize(tf: TransferFunction, Ts: float, **limits) -> DiscreteController:
    """Bilinear transform of ``tf`` at sample period ``Ts``.

    Both polynomials are multiplied through by ``(z + 1)^n`` (``n`` the
    denominator degree) and scaled so that ``a[0] == 1``.
    """
    if Ts <= 0:
        raise ValueError("sample period must be positive")
    k = 2.0 / Ts
    n = len(tf.den) - 1

    def mapped(poly):
        out = np.zeros(n + 1)
        deg = len(poly) - 1
        for i, c in enumerate(poly):
            p = deg - i
            term = np.polymul(np.poly1d([1.0, -1.0]) ** p, np.poly1d([1.0, 1.0]) ** (n - p)).coeffs
            out[n + 1 - len(term):] += c * k ** p * term
        return out

    num, den = mapped(tf.num), mapped(tf.den)
    if abs(den[0]) < 1e-12 * np.max(np.abs(den)):
        raise ValueError("degenerate discretisation: leading denominator coefficient vanishes")
    return DiscreteController(num / den[0], den / den[0], Ts, **limits)


@dataclass
class CascadeController:
    """Tracking (outer) and stabilisation (inner) loops for yaw and pitch.

    The tracking loops turn a pointing error (rad) into an inertial rate
    command (rad/s) and only tick when a new camera result arrives; their
    output is held in between. The stabilisation loops act on
    ``rate command - measured rate`` and output motor volts.
    """

    stab_yaw: DiscreteController
    stab_pitch: DiscreteController
    track_yaw: DiscreteController | None = None
    track_pitch: DiscreteController | None = None
    stabilization_enabled: bool = True
    rate_cmd_yaw: float = 0.0
    rate_cmd_pitch: float = 0.0

    def update(self, track_err=None, gyro=None, rate_override=None) -> tuple[float, float]:
        """One stabilisation tick; returns ``(v_yaw, v_pitch)``.

        ``track_err`` is a fresh :class:`~ispsim.tracking.TrackingError`
        (mrad) or ``None`` to hold the current rate command.
        ``rate_override = (yaw, pitch)`` replaces the tracking loops.
        """
        if rate_override is not None:
            self.rate_cmd_yaw, self.rate_cmd_pitch = rate_override
        elif track_err is not None and self.track_yaw is not None:
            self.rate_cmd_yaw = self.track_yaw.update(1e-3 * track_err.yaw_error)
            self.rate_cmd_pitch = self.track_pitch.update(1e-3 * track_err.pitch_error)
        if not self.stabilization_enabled:
            return 0.0, 0.0
        v_yaw = self.stab_yaw.update(self.rate_cmd_yaw - gyro.z)
        v_pitch = self.stab_pitch.update(self.rate_cmd_pitch - gyro.y)
        return v_yaw, v_pitch


def cascade_update(cascade: CascadeController, track_err, gyro, rate_override=None):
    """Functional alias of :meth:`CascadeController.update`."""
    return cascade.update(track_err, gyro, rate_override)
