"""Target geometry, camera projection and blob-centroid detection.

Image coordinates ``(u, v)`` are in pixels with the origin at the image
centre; ``u`` grows with column index (yaw error) and ``v`` with row index
(pitch error). The boresight is the platform ``+x_p`` axis.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .frames import quat_to_dcm

__all__ = [
    "CameraModel",
    "PixelCoord",
    "TrackingError",
    "tracking_error",
    "camera_project",
    "CameraPipeline",
    "detect_centroid",
    "pixel_to_error",
    "render_disk",
    "read_pgm",
    "write_pgm",
]


@dataclass(frozen=True)
class CameraModel:
    pixel_scale: float = 0.5  # mrad per pixel
    width: int = 640
    height: int = 480
    frame_rate: float = 4.0  # Hz
    processing_delay: float = 0.1  # s

    def __post_init__(self):
        if self.pixel_scale <= 0:
            raise ValueError("pixel_scale must be positive")
        if self.frame_rate <= 0:
            raise ValueError("frame_rate must be positive")
        if self.processing_delay < 0:
            raise ValueError("processing_delay must be non-negative")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("resolution must be positive")


@dataclass(frozen=True)
class PixelCoord:
    u: float
    v: float


@dataclass(frozen=True)
class TrackingError:
    """Angular offset of the target from the boresight (mrad).

    ``lost`` is set when the target is not in front of the platform.
    """

    yaw_error: float
    pitch_error: float
    lost: bool = False


def _errors_from_platform_vector(x, y, z):
    if x <= 0.0:
        return TrackingError(math.nan, math.nan, lost=True)
    # positive yaw error: target towards +y_p, needs a +z_p rotation
    # positive pitch error: target towards -z_p, needs a +y_p rotation
    return TrackingError(1e3 * math.atan2(y, x), 1e3 * math.atan2(-z, x))


def tracking_error(target_dir, platform_attitude) -> TrackingError:
    """Yaw/pitch offsets of an inertial unit vector seen from the platform."""
    d = np.asarray(target_dir, dtype=float)
    if abs(float(np.linalg.norm(d)) - 1.0) > 1e-9:
        raise ValueError("target direction must be a unit vector")
    v = quat_to_dcm(platform_attitude).T @ d
    return _errors_from_platform_vector(*v)


def camera_project(err: TrackingError, model: CameraModel) -> PixelCoord | None:
    """Quantise an angular offset to the pixel grid.

    Rounding is half-to-even, so an offset of exactly half a pixel does not
    register. Returns ``None`` when the target is lost or outside the frame.
    """
    if err.lost:
        return None
    u = err.yaw_error / model.pixel_scale
    v = err.pitch_error / model.pixel_scale
    if abs(u) > model.width / 2 or abs(v) > model.height / 2:
        return None
    return PixelCoord(float(np.rint(u)), float(np.rint(v)))


def pixel_to_error(px: PixelCoord, model: CameraModel) -> TrackingError:
    return TrackingError(px.u * model.pixel_scale, px.v * model.pixel_scale)


class CameraPipeline:
    """Frame capture followed by a fixed image-processing delay.

    Times are integer counts of the control tick so that the ordering of
    captures and deliveries is exact.
    """

    def __init__(self, model: CameraModel, tick: float):
        self.model = model
        self.frame_ticks = _ticks(1.0 / model.frame_rate, tick, "camera frame period")
        self.delay_ticks = _ticks(model.processing_delay, tick, "camera processing delay", allow_zero=True)
        self._queue: deque = deque()

    def is_frame(self, k: int) -> bool:
        return k % self.frame_ticks == 0

    def capture(self, k: int, err: TrackingError) -> None:
        self._queue.append((k + self.delay_ticks, camera_project(err, self.model)))

    def poll(self, k: int):
        """Newest processed frame ready at tick ``k``.

        Returns ``(True, PixelCoord | None)`` when a frame finished
        processing, ``(False, None)`` otherwise.
        """
        fresh, result = False, None
        while self._queue and self._queue[0][0] <= k:
            _, result = self._queue.popleft()
            fresh = True
        return fresh, result


def _ticks(period, tick, what, allow_zero=False):
    n = round(period / tick)
    if (n == 0 and not allow_zero) or abs(n * tick - period) > 1e-9 * max(period, tick):
        raise ValueError(f"{what} ({period:g} s) is not a multiple of the control period ({tick:g} s)")
    return n


def detect_centroid(frame, threshold: float) -> PixelCoord | None:
    """Intensity-weighted centroid of the largest bright blob.

    Pixels brighter than ``threshold`` are grouped into 4-connected
    components. Ties in area go to the component whose bounding box starts
    at the smallest (row, column).
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    img = np.asarray(frame, dtype=float)
    labels, n = ndimage.label(img > threshold)
    if n == 0:
        return None
    areas = np.bincount(labels.ravel())[1:]
    boxes = ndimage.find_objects(labels)
    best = min(range(n), key=lambda i: (-areas[i], boxes[i][0].start, boxes[i][1].start))
    rows, cols = ndimage.center_of_mass(img, labels, best + 1)
    h, w = img.shape
    return PixelCoord(cols - (w - 1) / 2.0, rows - (h - 1) / 2.0)


def render_disk(width: int, height: int, center: tuple[float, float], radius: float,
                intensity: float = 1.0, frame=None) -> np.ndarray:
    """Draw a filled disk (centre-origin pixel coordinates) onto a frame."""
    img = np.zeros((height, width)) if frame is None else np.array(frame, dtype=float)
    cols = np.arange(width) - (width - 1) / 2.0
    rows = np.arange(height) - (height - 1) / 2.0
    mask = (cols[None, :] - center[0]) ** 2 + (rows[:, None] - center[1]) ** 2 <= radius ** 2
    img[mask] = intensity
    return img


def write_pgm(path, frame, maxval: int = 255) -> None:
    """Write a grayscale frame in [0, 1] as a binary (P5) PGM."""
    img = np.clip(np.asarray(frame, dtype=float), 0.0, 1.0)
    data = np.rint(img * maxval).astype(">u2" if maxval > 255 else np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a P2 (ASCII) or P5 (binary) PGM into floats in [0, 1]."""
    raw = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        start = pos
        while not raw[pos:pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos].decode("ascii"))
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic == "P5":
        dtype = ">u2" if maxval > 255 else np.uint8
        data = np.frombuffer(raw[pos + 1:], dtype=dtype, count=w * h)
    elif magic == "P2":
        data = np.array(raw[pos:].split()[: w * h], dtype=float)
    else:
        raise ValueError(f"unsupported PGM magic {magic!r}")
    return data.reshape(h, w).astype(float) / maxval
