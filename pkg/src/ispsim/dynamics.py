"""Rigid-body equations of motion of the two-axis gimbal.

Both bodies are assumed to be suspended on their principal axes. The
platform pitch axis obeys

    T_yp = I_yyp * dw_yp + (I_xxp - I_zzp) * w_xp * w_zp

and the yaw axis (gimbal plus the platform torque reflected through the
pitch joint) obeys

    T_zg = (I_zzg + I_zzp cos^2 th + I_xxp sin^2 th) * dw_zg
         + (I_zzp - I_xxp) sin th cos th * dw_xg
         + (I_yyg - I_xxg) w_xg w_yg
         + (I_yyp - I_xxp) w_xp w_yp cos th
         + (I_yyp - I_zzp) w_yp w_zp sin th
         + I_zzp th_dot w_xp cos th
         + I_xxp th_dot w_zp sin th

where ``w_g``/``w_p`` are inertial rates in gimbal/platform coordinates.
The gimbal term uses the gimbal's own inertias; the yaw equation follows
from projecting the gimbal Euler equation plus ``L_PG^T T_p`` onto ``z_g``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .frames import FrameId, GimbalAngles, RateVector, quat_identity, wrap_angle

__all__ = [
    "InertiaTensor",
    "FrictionModel",
    "DynamicState",
    "GimbalModel",
    "SimulationDivergence",
    "MODELLER_INERTIA",
    "DEFAULT_GIMBAL_INERTIA",
    "pitch_acceleration",
    "yaw_acceleration",
    "friction_torque",
    "step_dynamics",
    "system_energy",
]


class SimulationDivergence(RuntimeError):
    """Raised when the integrated state stops being finite."""

    def __init__(self, t: float, message: str = ""):
        self.t = t
        super().__init__(message or f"state diverged at t = {t:.6f} s")


@dataclass(frozen=True)
class InertiaTensor:
    """Principal moments of inertia (kg m^2) of one body."""

    Ixx: float
    Iyy: float
    Izz: float
    body: str = "platform"

    def __post_init__(self):
        moments = (self.Ixx, self.Iyy, self.Izz)
        if not all(m > 0 for m in moments):
            raise ValueError(f"principal moments must be positive, got {moments}")
        a, b, c = moments
        # relative slack so that thin bodies (a + b == c) are accepted
        tol = 1e-12 * max(moments)
        if a + b < c - tol or b + c < a - tol or a + c < b - tol:
            raise ValueError(f"moments {moments} violate the triangle inequality")
        if self.body not in ("platform", "gimbal"):
            raise ValueError(f"unknown body tag {self.body!r}")


# Telescope modeller, products of inertia neglected.
MODELLER_INERTIA = InertiaTensor(0.0048, 0.0164, 0.0166, "platform")
# Not measured; a plausible estimate for the yaw gimbal frame.
DEFAULT_GIMBAL_INERTIA = InertiaTensor(0.0100, 0.0100, 0.0100, "gimbal")


@dataclass(frozen=True)
class FrictionModel:
    """Joint friction: viscous plus tanh-smoothed Coulomb."""

    viscous_coeff: float = 0.0005
    coulomb_level: float = 0.002
    epsilon: float = 0.01

    def __post_init__(self):
        if self.viscous_coeff < 0 or self.coulomb_level < 0:
            raise ValueError("friction coefficients must be non-negative")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


def friction_torque(relative_rate: float, model: FrictionModel) -> float:
    """Friction torque opposing a joint's relative rate (N m)."""
    return -(
        model.viscous_coeff * relative_rate
        + model.coulomb_level * math.tanh(relative_rate / model.epsilon)
    )


@dataclass(frozen=True)
class DynamicState:
    """Gimbal angles/rates plus the (prescribed) base motion."""

    angles: GimbalAngles = field(default_factory=GimbalAngles)
    base_attitude: np.ndarray = field(default_factory=quat_identity)
    base_rate: RateVector = field(default_factory=lambda: RateVector(0.0, 0.0, 0.0, FrameId.BASE))
    base_accel: RateVector = field(default_factory=lambda: RateVector(0.0, 0.0, 0.0, FrameId.BASE))

    def as_vector(self) -> np.ndarray:
        a = self.angles
        return np.concatenate(([a.psi, a.theta, a.psi_dot, a.theta_dot], self.base_attitude))

    @classmethod
    def from_vector(cls, x, base_rate=None, base_accel=None) -> "DynamicState":
        kwargs = {}
        if base_rate is not None:
            kwargs["base_rate"] = base_rate
        if base_accel is not None:
            kwargs["base_accel"] = base_accel
        return cls(
            angles=GimbalAngles(x[0], x[1], x[2], x[3]),
            base_attitude=np.array(x[4:8], dtype=float),
            **kwargs,
        )


def _body_rates(psi, theta, psi_dot, theta_dot, wb, dwb):
    """Gimbal/platform rates and the base-driven part of the gimbal acceleration."""
    cp, sp = math.cos(psi), math.sin(psi)
    ct, st = math.cos(theta), math.sin(theta)
    wbx, wby, wbz = wb
    dbx, dby, dbz = dwb
    wgx = cp * wbx + sp * wby
    wgy = -sp * wbx + cp * wby
    wgz = wbz + psi_dot
    # d/dt (L_GB w_b) picks up psi_dot times the rotated components
    dgx = cp * dbx + sp * dby + psi_dot * wgy
    dgy = -sp * dbx + cp * dby - psi_dot * wgx
    wpx = ct * wgx - st * wgz
    wpy = wgy + theta_dot
    wpz = st * wgx + ct * wgz
    return (wgx, wgy, wgz), (dgx, dgy, dbz), (wpx, wpy, wpz), (ct, st)


def _pitch_omega_dot(Ip: InertiaTensor, T_yp, wpx, wpz):
    return (T_yp - (Ip.Ixx - Ip.Izz) * wpx * wpz) / Ip.Iyy


def _yaw_omega_dot(Ip, Ig, T_zg, theta_dot, wg, dgx, wp, ct, st):
    wgx, wgy, _ = wg
    wpx, wpy, wpz = wp
    j_eq = Ig.Izz + Ip.Izz * ct * ct + Ip.Ixx * st * st
    rest = (
        (Ip.Izz - Ip.Ixx) * st * ct * dgx
        + (Ig.Iyy - Ig.Ixx) * wgx * wgy
        + (Ip.Iyy - Ip.Ixx) * wpx * wpy * ct
        + (Ip.Iyy - Ip.Izz) * wpy * wpz * st
        + Ip.Izz * theta_dot * wpx * ct
        + Ip.Ixx * theta_dot * wpz * st
    )
    return (T_zg - rest) / j_eq


def _unpack(state: DynamicState):
    a = state.angles
    return (
        a.psi,
        a.theta,
        a.psi_dot,
        a.theta_dot,
        (state.base_rate.x, state.base_rate.y, state.base_rate.z),
        (state.base_accel.x, state.base_accel.y, state.base_accel.z),
    )


def pitch_acceleration(state: DynamicState, inertia_p: InertiaTensor, T_yp: float) -> float:
    """Inertial pitch acceleration ``dw_yp`` of the platform (rad/s^2).

    The relative acceleration is ``theta_ddot = dw_yp - dw_yg``.
    """
    psi, theta, psi_dot, theta_dot, wb, dwb = _unpack(state)
    _, _, wp, _ = _body_rates(psi, theta, psi_dot, theta_dot, wb, dwb)
    return _pitch_omega_dot(inertia_p, T_yp, wp[0], wp[2])


def yaw_acceleration(
    state: DynamicState, inertia_p: InertiaTensor, inertia_g: InertiaTensor, T_zgp: float
) -> float:
    """Inertial yaw acceleration ``dw_zg`` of the gimbal (rad/s^2)."""
    psi, theta, psi_dot, theta_dot, wb, dwb = _unpack(state)
    wg, dg, wp, (ct, st) = _body_rates(psi, theta, psi_dot, theta_dot, wb, dwb)
    return _yaw_omega_dot(inertia_p, inertia_g, T_zgp, theta_dot, wg, dg[0], wp, ct, st)


BaseMotionFn = Callable[[float], tuple]


@dataclass(frozen=True)
class GimbalModel:
    """Mechanical parameters of the gimbal pair.

    ``lock_joints`` clamps both relative rates to zero, i.e. the platform is
    rigidly attached to the base (used for the unstabilised baseline).
    """

    inertia_p: InertiaTensor = MODELLER_INERTIA
    inertia_g: InertiaTensor = DEFAULT_GIMBAL_INERTIA
    friction_pitch: FrictionModel = field(default_factory=FrictionModel)
    friction_yaw: FrictionModel = field(default_factory=FrictionModel)
    lock_joints: bool = False

    def derivative(self, t, x, T_pitch, T_yaw, base_fn: BaseMotionFn):
        """Time derivative of ``[psi, theta, psi_dot, theta_dot, q(4)]``.

        ``T_pitch``/``T_yaw`` are the motor torques; joint friction is
        evaluated from the instantaneous relative rates.
        """
        psi, theta, psi_dot, theta_dot = x[0], x[1], x[2], x[3]
        wb, dwb = base_fn(t)
        qw, qx, qy, qz = x[4], x[5], x[6], x[7]
        wbx, wby, wbz = wb
        dq = (
            0.5 * (-qx * wbx - qy * wby - qz * wbz),
            0.5 * (qw * wbx + qy * wbz - qz * wby),
            0.5 * (qw * wby - qx * wbz + qz * wbx),
            0.5 * (qw * wbz + qx * wby - qy * wbx),
        )
        if self.lock_joints:
            return (psi_dot, theta_dot, 0.0, 0.0) + dq
        wg, dg, wp, (ct, st) = _body_rates(psi, theta, psi_dot, theta_dot, wb, dwb)
        fp, fy = self.friction_pitch, self.friction_yaw
        t_p = T_pitch - fp.viscous_coeff * theta_dot - fp.coulomb_level * math.tanh(theta_dot / fp.epsilon)
        t_y = T_yaw - fy.viscous_coeff * psi_dot - fy.coulomb_level * math.tanh(psi_dot / fy.epsilon)
        dwyp = _pitch_omega_dot(self.inertia_p, t_p, wp[0], wp[2])
        dwzg = _yaw_omega_dot(self.inertia_p, self.inertia_g, t_y, theta_dot, wg, dg[0], wp, ct, st)
        return (psi_dot, theta_dot, dwzg - dg[2], dwyp - dg[1]) + dq

    def step(self, t, x, T_pitch, T_yaw, base_fn: BaseMotionFn, dt):
        """One classical RK4 step with motor torques held over ``dt``."""
        if not (math.isfinite(T_pitch) and math.isfinite(T_yaw) and all(math.isfinite(v) for v in x)):
            raise SimulationDivergence(t, "non-finite state or torque")
        f = self.derivative
        try:
            k1 = f(t, x, T_pitch, T_yaw, base_fn)
            x2 = [xi + 0.5 * dt * ki for xi, ki in zip(x, k1)]
            k2 = f(t + 0.5 * dt, x2, T_pitch, T_yaw, base_fn)
            x3 = [xi + 0.5 * dt * ki for xi, ki in zip(x, k2)]
            k3 = f(t + 0.5 * dt, x3, T_pitch, T_yaw, base_fn)
            x4 = [xi + dt * ki for xi, ki in zip(x, k3)]
            k4 = f(t + dt, x4, T_pitch, T_yaw, base_fn)
        except (ValueError, OverflowError):
            raise SimulationDivergence(t + dt) from None
        out = [xi + dt / 6.0 * (a + 2 * b + 2 * c + d) for xi, a, b, c, d in zip(x, k1, k2, k3, k4)]
        if not all(math.isfinite(v) for v in out):
            raise SimulationDivergence(t + dt)
        n = math.sqrt(out[4] ** 2 + out[5] ** 2 + out[6] ** 2 + out[7] ** 2)
        out[4:8] = [q / n for q in out[4:8]]
        out[0] = wrap_angle(out[0])
        out[1] = wrap_angle(out[1])
        return out


def _static_base(state: DynamicState) -> BaseMotionFn:
    wb = (state.base_rate.x, state.base_rate.y, state.base_rate.z)
    dwb = (state.base_accel.x, state.base_accel.y, state.base_accel.z)
    return lambda t: (wb, dwb)


def step_dynamics(
    state: DynamicState,
    torques: tuple[float, float],
    model: GimbalModel,
    dt: float,
    base_fn: BaseMotionFn | None = None,
    t: float = 0.0,
) -> DynamicState:
    """Advance ``state`` by ``dt`` under motor torques ``(T_pitch, T_yaw)``.

    ``base_fn(t) -> (rate, accel)`` supplies base motion in B; when omitted
    the base rate/acceleration stored in ``state`` are held constant.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    fn = base_fn or _static_base(state)
    x = model.step(t, list(state.as_vector()), torques[0], torques[1], fn, dt)
    wb, dwb = fn(t + dt)
    return DynamicState.from_vector(
        x,
        base_rate=RateVector(*wb, FrameId.BASE),
        base_accel=RateVector(*dwb, FrameId.BASE),
    )


def system_energy(state: DynamicState, inertia_p: InertiaTensor, inertia_g: InertiaTensor) -> float:
    """Rotational kinetic energy of gimbal plus platform (J)."""
    psi, theta, psi_dot, theta_dot, wb, dwb = _unpack(state)
    wg, _, wp, _ = _body_rates(psi, theta, psi_dot, theta_dot, wb, dwb)
    e_g = inertia_g.Ixx * wg[0] ** 2 + inertia_g.Iyy * wg[1] ** 2 + inertia_g.Izz * wg[2] ** 2
    e_p = inertia_p.Ixx * wp[0] ** 2 + inertia_p.Iyy * wp[1] ** 2 + inertia_p.Izz * wp[2] ** 2
    return 0.5 * (e_g + e_p)
