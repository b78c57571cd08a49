"""Command-line front end.

Subcommands
-----------
design   design and discretise the controllers of a scenario
run      simulate a scenario (or the whole bundled set) and write telemetry
metrics  compute performance figures from telemetry CSV files
verify   run the acceptance suite

Exit codes: 0 success, 1 validation error, 2 simulation divergence,
3 acceptance failure. Files are only ever written inside ``--out``, which
defaults to ``$ISPSIM_OUT`` or ``./ispsim-out``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import yaml

from . import __version__
from .acceptance import format_result, load_bundled, run_acceptance
from .control import DesignError
from .dynamics import SimulationDivergence
from .metrics import MetricsError, bmi, format_summary, jitter, step_metrics, summary_csv, summary_table
from .profiles import BaseMotionProfile, SineComponent
from .scenario import (
    ConfigError,
    ControllerSet,
    Scenario,
    bundled_scenarios,
    design_controllers,
    load_scenario,
    save_scenario,
)
from .simulation import TelemetryLog, run_scenario

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_DIVERGENCE = 2
EXIT_ACCEPTANCE = 3

OUT_ENV = "ISPSIM_OUT"


class _Console:
    def __init__(self, quiet: bool):
        self.quiet = quiet

    def say(self, *args):
        if not self.quiet:
            print(*args)

    @staticmethod
    def error(msg):
        print(f"error: {msg}", file=sys.stderr)


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or "ispsim-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _inside(out: Path, name: str) -> Path:
    """Path for ``name`` directly inside ``out``; rejects anything that escapes."""
    safe = Path(name).name
    if not safe or safe in (".", ".."):
        raise ConfigError(f"invalid output name {name!r}")
    return out / safe


def _load(args) -> Scenario:
    if not args.scenario:
        raise ConfigError("--scenario is required")
    p = Path(args.scenario)
    sc = load_scenario(p) if p.exists() else load_bundled(args.scenario)
    if args.seed is not None:
        sc = sc.replace(seed=args.seed)
    return sc


def _controllers(sc: Scenario, con: _Console) -> ControllerSet:
    if sc.controllers:
        return ControllerSet.from_dict(sc.controllers)
    con.say(f"{sc.name}: no designed controllers in the scenario; designing from its specs")
    return design_controllers(sc)


# -- design ------------------------------------------------------------------

def cmd_design(args, con: _Console) -> int:
    sc = _load(args)
    cs = design_controllers(sc)
    out = _out_dir(args)
    report = cs.report()
    designed = sc.replace(controllers=cs.to_dict())
    save_scenario(designed, _inside(out, f"{sc.name}.designed.yaml"))
    _inside(out, f"{sc.name}.design.json").write_text(json.dumps(report, indent=2) + "\n")
    for role, per in report.items():
        for ch, r in per.items():
            con.say(f"{role:<14}{ch:<6} kp={r['kp']:.4g} ki={r['ki']:.4g} crossover={r['crossover_hz']:.3g} Hz "
                    f"PM={r['phase_margin_deg']:.1f} deg GM={r['gain_margin_db']:.1f} dB "
                    f"bandwidth={r['bandwidth_hz']:.3g} Hz resonance={r['resonance_db']:.2f} dB")
    con.say(f"wrote {out}")
    return EXIT_OK


# -- run ---------------------------------------------------------------------

def _log_metrics(log: TelemetryLog, frequency: float | None) -> dict:
    res = {
        "jitter_pitch_mrad": jitter(log, "y", 2.0 if log["t"][-1] > 4.0 else 0.0),
        "jitter_yaw_mrad": jitter(log, "z", 2.0 if log["t"][-1] > 4.0 else 0.0),
    }
    for ch, col in (("yaw", "ytc"), ("pitch", "ptc")):
        if log[col].max() != log[col].min():
            m = step_metrics(log, ch)
            res[f"{ch}_overshoot_pct"] = m.overshoot
            res[f"{ch}_settling_s"] = m.settling_time
    if frequency:
        for ax in ("x", "y", "z"):
            if log[f"wb_{ax}"].max() != log[f"wb_{ax}"].min():
                for resp in ("y", "z"):
                    try:
                        res[f"bmi_{ax}b_to_{resp}p_db"] = bmi(log, ax, resp, frequency).bmi_db
                    except MetricsError:
                        pass
    return res


def _format_metrics(name: str, res: dict) -> str:
    return "\n".join([name] + [f"  {k:<24}{v:.4g}" for k, v in res.items()])


def _simulate(sc: Scenario, out: Path, con: _Console) -> TelemetryLog:
    cs = _controllers(sc, con)
    try:
        log = run_scenario(sc, cs)
    except SimulationDivergence as exc:
        partial = getattr(exc, "log", None)
        if partial is not None:
            partial.to_csv(_inside(out, f"{sc.name}.csv"))
        raise
    log.to_csv(_inside(out, f"{sc.name}.csv"))
    res = _log_metrics(log, sc.base_motion.fundamental_hz)
    text = _format_metrics(sc.name, res)
    _inside(out, f"{sc.name}.summary.txt").write_text(text + "\n")
    con.say(text)
    return log


def _aligned(sc: Scenario, axis: str, amplitude: float, frequency: float) -> Scenario:
    return sc.replace(
        name=f"bmi_aligned_{'pitch' if axis == 'y' else 'yaw'}",
        base_motion=BaseMotionProfile("sine", [SineComponent(axis, amplitude, frequency)]),
        psi0=0.0,
        theta0=0.0,
    )


def _run_bundle(args, out: Path, con: _Console) -> int:
    logs = {}
    for name in bundled_scenarios():
        sc = load_bundled(name)
        if args.seed is not None:
            sc = sc.replace(seed=args.seed)
        logs[name] = _simulate(sc, out, con)
    worst = load_bundled("bmi_worstcase")
    aligned = {}
    for ch, axis, amp, freq in (("pitch", "y", 1.1, 2.0), ("yaw", "z", 1.2, 2.5)):
        aligned[ch] = _simulate(_aligned(worst, axis, amp, freq), out, con)
    rows = summary_table(
        bmi_aligned_logs=aligned,
        bmi_cross_log=logs["bmi_worstcase"],
        step_logs={"yaw": logs["step_yaw"], "pitch": logs["step_pitch"]},
        static_log=logs["static_jitter"],
        dynamic_log=logs["dynamic_jitter"],
    )
    _inside(out, "summary.txt").write_text(format_summary(rows) + "\n")
    _inside(out, "summary.csv").write_text(summary_csv(rows))
    con.say(format_summary(rows))
    return EXIT_OK


def cmd_run(args, con: _Console) -> int:
    out = _out_dir(args)
    if not args.scenario:
        return _run_bundle(args, out, con)
    _simulate(_load(args), out, con)
    return EXIT_OK


# -- metrics -----------------------------------------------------------------

def cmd_metrics(args, con: _Console) -> int:
    if not args.telemetry:
        raise ConfigError("give at least one telemetry CSV")
    out = _out_dir(args)
    texts = []
    for path in args.telemetry:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"no such telemetry file: {path}")
        log = TelemetryLog.from_csv(p)
        texts.append(_format_metrics(p.stem, _log_metrics(log, args.frequency)))
    text = "\n".join(texts)
    _inside(out, "metrics.txt").write_text(text + "\n")
    con.say(text)
    return EXIT_OK


# -- verify ------------------------------------------------------------------

def cmd_verify(args, con: _Console) -> int:
    overlay = {}
    if args.scenario:
        p = Path(args.scenario)
        if not p.is_file():
            raise ConfigError(f"no such overlay file: {args.scenario}")
        overlay = yaml.safe_load(p.read_text()) or {}
        if not isinstance(overlay, dict):
            raise ConfigError("overlay file must contain a mapping")
    if args.seed is not None:
        overlay.setdefault("run", {})["seed"] = args.seed
    results = run_acceptance(overlay or None)
    lines = [format_result(r) for r in results]
    for ln in lines:
        con.say(ln)
    if args.out or os.environ.get(OUT_ENV):
        _inside(_out_dir(args), "acceptance.txt").write_text("\n".join(lines) + "\n")
    failed = [r.number for r in results if not r.passed]
    con.say("all criteria passed" if not failed else f"failed: {', '.join(map(str, failed))}")
    return EXIT_ACCEPTANCE if failed else EXIT_OK


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario YAML path or bundled scenario name "
                                           f"({', '.join(bundled_scenarios())})")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./ispsim-out)")
    common.add_argument("--seed", type=_seed, help="override the scenario's master seed")
    common.add_argument("--quiet", action="store_true", help="print errors only")

    parser = argparse.ArgumentParser(
        prog="ispsim",
        description="Two-axis stabilised platform simulator.",
        epilog="Exit codes: 0 success, 1 validation error, 2 simulation divergence, 3 acceptance failure. "
               f"Outputs go to --out, else ${OUT_ENV}, else ./ispsim-out.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("design", parents=[common], help="design controllers; writes <name>.designed.yaml "
                                                      "and <name>.design.json")
    sub.add_parser("run", parents=[common], help="simulate a scenario (all bundled ones plus a summary "
                                                   "table when --scenario is omitted)")
    m = sub.add_parser("metrics", parents=[common], help="metrics from telemetry CSV files")
    m.add_argument("telemetry", nargs="*", help="telemetry CSV files written by 'run'")
    m.add_argument("--frequency", type=float, help="disturbance frequency (Hz) for BMI")
    sub.add_parser("verify", parents=[common], help="run the acceptance suite; --scenario names an overlay "
                                                      "YAML merged into every acceptance scenario")
    return parser


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be a non-negative integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"seed must be a non-negative integer, got {text!r}")
    return v


_COMMANDS = {"design": cmd_design, "run": cmd_run, "metrics": cmd_metrics, "verify": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    con = _Console(args.quiet)
    try:
        return _COMMANDS[args.command](args, con)
    except SimulationDivergence as exc:
        con.error(str(exc))
        return EXIT_DIVERGENCE
    except (ConfigError, DesignError, MetricsError, OSError) as exc:
        con.error(str(exc))
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
