"""Rate gyro and potentiometer measurement models."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np

from .frames import FrameId, RateVector, wrap_angle

__all__ = [
    "GyroModel",
    "PotModel",
    "quantize",
    "gyro_sample",
    "pot_sample",
    "sensor_stream",
]

DEG = math.pi / 180.0


def quantize(value: float, step: float) -> float:
    """Round to the nearest multiple of ``step``, ties away from zero.

    A zero step disables quantisation.
    """
    if step <= 0:
        return value
    q = value / step
    return math.copysign(math.floor(abs(q) + 0.5), q) * step


@dataclass(frozen=True)
class GyroModel:
    """Three-axis MEMS rate gyro (all rates in rad/s)."""

    full_scale: float = 250.0 * DEG
    sample_rate: float = 1000.0
    noise_std: float = 0.02 * DEG
    bias: float = 0.05 * DEG
    quantization_step: float = DEG / 131.0  # 16-bit at +/-250 deg/s; 0 disables

    def __post_init__(self):
        if self.full_scale <= 0 or self.sample_rate <= 0:
            raise ValueError("full_scale and sample_rate must be positive")
        if self.noise_std < 0 or self.quantization_step < 0:
            raise ValueError("noise_std and quantization_step must be non-negative")


@dataclass(frozen=True)
class PotModel:
    """Continuous-rotation potentiometer read by an ADC."""

    noise_std: float = 0.0
    quantization_step: float = 2.0 * math.pi / 4096
    continuous_rotation: bool = True

    def __post_init__(self):
        if self.quantization_step <= 0:
            raise ValueError("quantization_step must be positive")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")


def gyro_sample(true_rate: RateVector, model: GyroModel, rng: np.random.Generator) -> RateVector:
    """Measure a platform rate: add bias and noise, clamp, then quantise."""
    if true_rate.frame is not FrameId.PLATFORM:
        raise ValueError("gyro measures rates in the platform frame")
    if model.noise_std > 0:
        noise = rng.normal(0.0, model.noise_std, 3)
    else:
        noise = (0.0, 0.0, 0.0)
    fs = model.full_scale
    out = []
    for c, n in zip((true_rate.x, true_rate.y, true_rate.z), noise):
        v = min(max(c + model.bias + n, -fs), fs)
        out.append(quantize(v, model.quantization_step))
    return RateVector(out[0], out[1], out[2], FrameId.PLATFORM)


def pot_sample(true_angle: float, model: PotModel, rng: np.random.Generator) -> float:
    """Measure a relative angle: add noise, wrap, then quantise."""
    a = true_angle
    if model.noise_std > 0:
        a += rng.normal(0.0, model.noise_std)
    return wrap_angle(quantize(wrap_angle(a), model.quantization_step))


def sensor_stream(seed: int, name: str) -> np.random.Generator:
    """Random stream for one named sensor, derived from the master seed.

    Streams depend only on ``(seed, name)``, so adding or silencing one
    sensor never shifts another sensor's sequence.
    """
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(name.encode())]))
