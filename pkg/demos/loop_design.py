"""Design the four default loops and print their margins and closed-loop shape.

Run with ``python3 demos/loop_design.py``.
"""

from ispsim.scenario import Scenario, design_controllers


def main():
    controllers = design_controllers(Scenario())
    report = controllers.report()
    header = f"{'loop':<20}{'Kp':>9}{'Ki':>9}{'wc Hz':>8}{'PM deg':>8}{'GM dB':>8}{'BW Hz':>8}{'Mr dB':>7}"
    print(header)
    print("-" * len(header))
    for role, per_axis in report.items():
        for axis, r in per_axis.items():
            print(f"{role + '/' + axis:<20}{r['kp']:>9.3f}{r['ki']:>9.3f}{r['crossover_hz']:>8.2f}"
                  f"{r['phase_margin_deg']:>8.1f}{r['gain_margin_db']:>8.1f}{r['bandwidth_hz']:>8.2f}"
                  f"{r['resonance_db']:>7.2f}")
    yaw = controllers.stabilization["yaw"]
    print(f"\nyaw stabilisation, discretised: b={yaw.b.tolist()} a={yaw.a.tolist()}")


if __name__ == "__main__":
    main()
