"""Run the step and worst-case isolation scenarios and print the headline numbers.

Run with ``python3 demos/stabilisation_and_tracking.py [out.csv]``; the
optional argument saves the isolation telemetry for plotting elsewhere.
"""

import sys

from ispsim.acceptance import load_bundled
from ispsim.metrics import bmi, step_metrics
from ispsim.simulation import run_scenario


def main(argv):
    for name, channel in (("step_yaw", "yaw"), ("step_pitch", "pitch")):
        m = step_metrics(run_scenario(load_bundled(name)), channel)
        print(f"{name:<12} overshoot {m.overshoot:5.2f} %   settling {m.settling_time:5.3f} s")

    log = run_scenario(load_bundled("bmi_worstcase"))
    for resp in ("y", "z"):
        r = bmi(log, "y", resp)
        print(f"base y_b -> platform {resp}_p: {r.bmi_db:6.2f} dB "
              f"(residual {r.response_dps:.3f} deg/s over {r.cycles} cycles)")
    if len(argv) > 1:
        log.to_csv(argv[1])
        print(f"telemetry written to {argv[1]}")


if __name__ == "__main__":
    main(sys.argv)
