"""Reference frames, the yaw-pitch Euler sequence and attitude propagation.

Four frames are used: Inertial (I), Base (B), Gimbal (G) and Platform (P).
The gimbal yaws by ``psi`` about ``z_b``/``z_g`` and the platform pitches by
``theta`` about ``y_g``/``y_p``. Rotations are right handed.

Direction-cosine matrices are *coordinate transforms*: ``L_GB @ v_B`` gives
the components of the same vector in frame G. Attitudes are unit quaternions
``[w, x, y, z]`` (scalar first) describing a body frame relative to Inertial,
so that ``quat_to_dcm(q) @ v_body`` is the vector in I.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FrameId",
    "GimbalAngles",
    "RateVector",
    "wrap_angle",
    "rot_z",
    "rot_y",
    "euler_dcm",
    "rate_chain",
    "quat_identity",
    "quat_multiply",
    "quat_normalize",
    "quat_to_dcm",
    "quat_from_axis_angle",
    "attitude_integrate",
    "platform_attitude",
]


class FrameId(enum.Enum):
    INERTIAL = "I"
    BASE = "B"
    GIMBAL = "G"
    PLATFORM = "P"


def wrap_angle(angle: float) -> float:
    """Wrap an angle to the half-open interval (-pi, pi]."""
    return math.pi - (math.pi - angle) % (2.0 * math.pi)


@dataclass(frozen=True)
class GimbalAngles:
    """Relative gimbal angles and rates.

    ``psi`` is the yaw from B to G, ``theta`` the pitch from G to P.
    Angles are wrapped on construction.
    """

    psi: float = 0.0
    theta: float = 0.0
    psi_dot: float = 0.0
    theta_dot: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "psi", wrap_angle(float(self.psi)))
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))
        if not (math.isfinite(self.psi_dot) and math.isfinite(self.theta_dot)):
            raise ValueError("gimbal rates must be finite")


@dataclass(frozen=True)
class RateVector:
    """Angular rate components (rad/s) expressed in ``frame``."""

    x: float
    y: float
    z: float
    frame: FrameId

    def __post_init__(self):
        if not all(math.isfinite(c) for c in (self.x, self.y, self.z)):
            raise ValueError("rate components must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @classmethod
    def from_array(cls, v, frame: FrameId) -> "RateVector":
        return cls(float(v[0]), float(v[1]), float(v[2]), frame)


def rot_z(angle: float) -> np.ndarray:
    """Coordinate transform for a frame rotated by ``angle`` about z."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_y(angle: float) -> np.ndarray:
    """Coordinate transform for a frame rotated by ``angle`` about y."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])


def euler_dcm(angles: GimbalAngles) -> dict[str, np.ndarray]:
    """Direction-cosine matrices of the yaw-pitch sequence.

    Returns
    -------
    dict
        ``L_GB`` (B to G), ``L_PG`` (G to P) and ``L_PB = L_PG @ L_GB``.
    """
    L_GB = rot_z(angles.psi)
    L_PG = rot_y(angles.theta)
    return {"L_GB": L_GB, "L_PG": L_PG, "L_PB": L_PG @ L_GB}


def rate_chain(omega_b: RateVector, angles: GimbalAngles) -> tuple[RateVector, RateVector]:
    """Chain the base rate through the gimbals.

    ``omega_g = L_GB omega_b + (0, 0, psi_dot)`` and
    ``omega_p = L_PG omega_g + (0, theta_dot, 0)``.
    """
    if omega_b.frame is not FrameId.BASE:
        raise ValueError(f"omega_b must be expressed in B, got {omega_b.frame.value}")
    dcm = euler_dcm(angles)
    w_g = dcm["L_GB"] @ omega_b.as_array() + np.array([0.0, 0.0, angles.psi_dot])
    w_p = dcm["L_PG"] @ w_g + np.array([0.0, angles.theta_dot, 0.0])
    return RateVector.from_array(w_g, FrameId.GIMBAL), RateVector.from_array(w_p, FrameId.PLATFORM)


# -- quaternions -------------------------------------------------------------


def quat_identity() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_multiply(p, q) -> np.ndarray:
    pw, px, py, pz = p
    qw, qx, qy, qz = q
    return np.array(
        [
            pw * qw - px * qx - py * qy - pz * qz,
            pw * qx + px * qw + py * qz - pz * qy,
            pw * qy - px * qz + py * qw + pz * qx,
            pw * qz + px * qy - py * qx + pz * qw,
        ]
    )


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = math.sqrt(float(q @ q))
    if n == 0.0 or not math.isfinite(n):
        raise ValueError("cannot normalise a zero or non-finite quaternion")
    return q / n


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    h = 0.5 * angle
    return np.concatenate(([math.cos(h)], math.sin(h) * axis))


def quat_to_dcm(q) -> np.ndarray:
    """Rotation matrix taking body components to Inertial components."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def attitude_integrate(att, omega: RateVector, dt: float) -> np.ndarray:
    """Advance an attitude by a body rate held constant over ``dt``.

    Uses the exact exponential map for a constant rate, so the only error
    source is the zero-order hold on ``omega``. The result is renormalised.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    w = omega.as_array()
    rate = float(np.linalg.norm(w))
    if rate == 0.0:
        return quat_normalize(att)
    dq = quat_from_axis_angle(w / rate, rate * dt)
    return quat_normalize(quat_multiply(att, dq))


def platform_attitude(base_attitude, angles: GimbalAngles) -> np.ndarray:
    """Platform attitude relative to Inertial as a quaternion.

    The gimbal frame is the base frame yawed by ``psi``; the platform is the
    gimbal frame pitched by ``theta``.
    """
    q_bg = quat_from_axis_angle((0.0, 0.0, 1.0), angles.psi)
    q_gp = quat_from_axis_angle((0.0, 1.0, 0.0), angles.theta)
    return quat_normalize(quat_multiply(quat_multiply(base_attitude, q_bg), q_gp))
