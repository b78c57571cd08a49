"""Sweep constant target offsets and show the smallest one the tracker corrects.

The coarse default camera ignores anything that rounds to pixel zero.
A finer camera with the same field of view lowers that floor.
Run with ``python3 demos/resolution_floor.py``.
"""

import numpy as np

from ispsim.profiles import TargetProfile
from ispsim.scenario import Scenario, design_controllers
from ispsim.sensing import GyroModel
from ispsim.simulation import run_scenario
from ispsim.tracking import CameraModel


def response_mrad(sc, controllers, offset):
    log = run_scenario(sc.replace(target=TargetProfile(offset_mrad=(offset, 0.0))), controllers)
    return 1e3 * np.max(np.abs(log["psi"]))


def main():
    base = Scenario(duration=2.0, gyro=GyroModel(noise_std=0.0, bias=0.0))
    cameras = {
        "0.5 mrad/px": CameraModel(),
        "0.1 mrad/px": CameraModel(pixel_scale=0.1, width=3200, height=2400),
    }
    offsets = [0.05, 0.1, 0.2, 0.25, 0.3, 0.5, 1.0]
    print(f"{'offset mrad':>12}" + "".join(f"{k:>14}" for k in cameras))
    scenarios = [base.replace(camera=c) for c in cameras.values()]
    runs = [(sc, design_controllers(sc)) for sc in scenarios]
    for off in offsets:
        cells = []
        for sc, ctrl in runs:
            moved = response_mrad(sc, ctrl, off)
            cells.append(f"{moved:>10.3f} {'*' if moved > 1e-3 else ' ':<3}")
        print(f"{off:>12.2f}" + "".join(cells))
    print("\n* marks a corrective response (joint motion above 1 micro-rad)")


if __name__ == "__main__":
    main()
