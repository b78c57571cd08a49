"""Base-motion and target profiles."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .frames import FrameId, RateVector

__all__ = [
    "SineComponent",
    "BaseMotionProfile",
    "TargetProfile",
    "base_motion",
    "base_motion_with_accel",
    "target_direction",
    "load_recorded_csv",
    "SIDEREAL_RATE",
]

SIDEREAL_RATE = 2.0 * math.pi / 86164.0905  # rad/s
_AXES = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class SineComponent:
    axis: str
    amplitude: float  # rad/s
    frequency: float  # Hz
    phase: float = 0.0  # rad

    def __post_init__(self):
        if self.axis not in _AXES:
            raise ValueError(f"axis must be one of x, y, z, got {self.axis!r}")
        if self.frequency <= 0:
            raise ValueError("sine frequency must be positive")


@dataclass
class BaseMotionProfile:
    """Prescribed base angular rate in frame B.

    ``kind`` is ``none``, ``sine`` (one component), ``multisine`` or
    ``recorded`` (zero-order hold over ``times``/``rates``).
    """

    kind: str = "none"
    components: list = field(default_factory=list)
    times: np.ndarray | None = None
    rates: np.ndarray | None = None
    csv: str | None = None
    _warned: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        self.components = [c if isinstance(c, SineComponent) else SineComponent(**c) for c in self.components]
        if self.kind not in ("none", "sine", "multisine", "recorded"):
            raise ValueError(f"unknown base-motion kind {self.kind!r}")
        if self.kind == "sine" and len(self.components) != 1:
            raise ValueError("a sine profile takes exactly one component")
        if self.kind == "recorded":
            if self.times is None and self.csv is not None:
                self.times, self.rates = load_recorded_csv(self.csv)
            if self.times is None or len(self.times) == 0:
                raise ValueError("recorded profile needs samples")
            self.times = np.asarray(self.times, dtype=float)
            self.rates = np.asarray(self.rates, dtype=float).reshape(-1, 3)

    @property
    def fundamental_hz(self) -> float | None:
        if self.kind == "sine":
            return self.components[0].frequency
        return None


def base_motion_with_accel(profile: BaseMotionProfile, t: float):
    """Base rate and its time derivative at ``t`` as plain tuples."""
    w = [0.0, 0.0, 0.0]
    dw = [0.0, 0.0, 0.0]
    if profile.kind in ("sine", "multisine"):
        for c in profile.components:
            arg = 2.0 * math.pi * c.frequency * t + c.phase
            i = _AXES[c.axis]
            w[i] += c.amplitude * math.sin(arg)
            dw[i] += c.amplitude * 2.0 * math.pi * c.frequency * math.cos(arg)
    elif profile.kind == "recorded":
        times = profile.times
        k = int(np.searchsorted(times, t, side="right")) - 1
        if k >= len(times) - 1 and t > times[-1] and not profile._warned:
            warnings.warn("recorded base motion exhausted; holding final sample", RuntimeWarning, stacklevel=2)
            profile._warned = True
        k = min(max(k, 0), len(times) - 1)
        w = [float(v) for v in profile.rates[k]]
    return tuple(w), tuple(dw)


def base_motion(profile: BaseMotionProfile, t: float) -> RateVector:
    """Base angular rate in B at time ``t``."""
    if t < 0:
        raise ValueError("time must be non-negative")
    w, _ = base_motion_with_accel(profile, t)
    return RateVector(*w, FrameId.BASE)


def load_recorded_csv(path):
    """Read a ``t, wx, wy, wz`` (rad/s) CSV of recorded base motion."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if rows and rows[0][0].strip().lower() == "t":
        rows = rows[1:]
    data = np.array(rows, dtype=float)
    if data.ndim != 2 or data.shape[1] != 4:
        raise ValueError(f"{path}: expected columns t, wx, wy, wz")
    if np.any(np.diff(data[:, 0]) <= 0):
        raise ValueError(f"{path}: time column must be strictly increasing")
    return data[:, 0], data[:, 1:]


@dataclass
class TargetProfile:
    """Inertial target direction.

    ``direction`` may be the string ``"boresight"`` (the initial line of
    sight). With ``kind="drift"`` the direction rotates about
    ``drift_axis`` at ``drift_rate``. ``offset_mrad`` is a constant
    (yaw, pitch) offset added to what the camera sees.
    """

    kind: str = "fixed"
    direction: object = "boresight"
    drift_rate: float = 0.0
    drift_axis: tuple = (0.0, 0.0, 1.0)
    offset_mrad: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.kind not in ("fixed", "drift"):
            raise ValueError(f"unknown target kind {self.kind!r}")
        if not isinstance(self.direction, str):
            d = np.asarray(self.direction, dtype=float)
            self.direction = tuple(float(v) for v in d / np.linalg.norm(d))
        elif self.direction != "boresight":
            raise ValueError("direction must be a vector or 'boresight'")
        a = np.asarray(self.drift_axis, dtype=float)
        self.drift_axis = tuple(float(v) for v in a / np.linalg.norm(a))
        self.offset_mrad = tuple(float(v) for v in self.offset_mrad)


def target_direction(profile: TargetProfile, t: float, initial=None) -> np.ndarray:
    """Unit target direction in I at time ``t``.

    ``initial`` resolves the ``"boresight"`` placeholder.
    """
    if t < 0:
        raise ValueError("time must be non-negative")
    d0 = np.asarray(initial if profile.direction == "boresight" else profile.direction, dtype=float)
    if d0.shape != (3,):
        raise ValueError("a boresight target needs the initial line of sight")
    if profile.kind == "drift" and profile.drift_rate != 0.0:
        k = np.asarray(profile.drift_axis)
        ang = profile.drift_rate * t
        # Rodrigues rotation of d0 about k
        d0 = d0 * math.cos(ang) + np.cross(k, d0) * math.sin(ang) + k * (k @ d0) * (1 - math.cos(ang))
    return d0 / np.linalg.norm(d0)
