"""Direct-drive brushed DC motor.

The winding inductance is neglected: its electrical pole sits far above the
rate-loop bandwidth, so torque follows the average (PWM) voltage instantly.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["MotorParams", "motor_torque"]


@dataclass(frozen=True)
class MotorParams:
    torque_constant: float = 0.04  # N m / A
    back_emf_constant: float = 0.04  # V s / rad
    winding_resistance: float = 1.0  # ohm
    supply_limit: float = 24.0  # V

    def __post_init__(self):
        for name in ("torque_constant", "back_emf_constant", "winding_resistance", "supply_limit"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def damping(self) -> float:
        """Back-EMF damping ``Kt Ke / R`` seen at the shaft (N m s/rad)."""
        return self.torque_constant * self.back_emf_constant / self.winding_resistance

    @property
    def torque_per_volt(self) -> float:
        return self.torque_constant / self.winding_resistance


def motor_torque(command_voltage: float, shaft_rate: float, params: MotorParams) -> float:
    """Shaft torque for an average terminal voltage and shaft rate."""
    lim = params.supply_limit
    v = min(max(command_voltage, -lim), lim)
    return params.torque_constant * (v - params.back_emf_constant * shaft_rate) / params.winding_resistance
