"""Scenario description, YAML configuration files and controller design.

A scenario file is a YAML mapping with the sections ``bodies``, ``motors``,
``sensors``, ``camera``, ``controllers``, ``profiles`` and ``run``. Every
key is optional; omitted values take the library defaults. Values are SI
(rad, rad/s, s, N m) unless the key carries a unit suffix: ``_deg`` for
degrees and ``_dps`` for degrees per second. Unknown keys are rejected.
"""

from __future__ import annotations

import copy
import dataclasses
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from .actuation import MotorParams
from .control import (
    CascadeController,
    DiscreteController,
    LoopDesign,
    LoopSpec,
    TransferFunction,
    design_loop,
    pade,
    tustin_discretize,
)
from .dynamics import FrictionModel, GimbalModel, InertiaTensor
from .profiles import BaseMotionProfile, SineComponent, TargetProfile
from .sensing import GyroModel, PotModel
from .tracking import CameraModel

__all__ = [
    "ConfigError",
    "CommandProfile",
    "RateCommandProfile",
    "Scenario",
    "ControllerSet",
    "stabilization_plant",
    "tracking_plant",
    "design_controllers",
    "build_cascade",
    "scenario_from_dict",
    "scenario_to_dict",
    "load_scenario",
    "save_scenario",
    "bundled_scenarios",
    "bundled_scenario_path",
]

DEG = math.pi / 180.0

DEFAULT_STAB_SPEC = LoopSpec(bandwidth_hz=38.0, resonance_limit_db=3.0, pole_hz=150.0, form="PI", crossover_hz=28.0,
                              integral_ratio=0.35)
DEFAULT_TRACK_SPEC = LoopSpec(bandwidth_hz=1.0, resonance_limit_db=1.0, pole_hz=10.0, form="P", crossover_hz=0.37)


class ConfigError(ValueError):
    """Malformed scenario configuration; the message names the key."""


@dataclass
class CommandProfile:
    """Step in the tracking command (pointing offset, mrad)."""

    yaw_mrad: float = 0.0
    pitch_mrad: float = 0.0
    step_time: float = 0.0

    def at(self, t: float) -> tuple[float, float]:
        if t >= self.step_time:
            return self.yaw_mrad, self.pitch_mrad
        return 0.0, 0.0


@dataclass
class RateCommandProfile:
    """Direct inertial-rate step (rad/s) that bypasses the tracking loops."""

    enabled: bool = False
    yaw: float = 0.0
    pitch: float = 0.0
    step_time: float = 0.0

    def at(self, t: float) -> tuple[float, float]:
        if t >= self.step_time:
            return self.yaw, self.pitch
        return 0.0, 0.0


@dataclass
class Scenario:
    """Everything needed to reproduce one simulation run."""

    name: str = "scenario"
    gimbal: GimbalModel = field(default_factory=GimbalModel)
    motor_pitch: MotorParams = field(default_factory=MotorParams)
    motor_yaw: MotorParams = field(default_factory=MotorParams)
    gyro: GyroModel = field(default_factory=GyroModel)
    pot: PotModel = field(default_factory=PotModel)
    camera: CameraModel = field(default_factory=CameraModel)
    stab_spec: LoopSpec = DEFAULT_STAB_SPEC
    track_spec: LoopSpec = DEFAULT_TRACK_SPEC
    stabilization_enabled: bool = True
    tracking_enabled: bool = True
    rate_limit: float = 2.0
    controllers: dict | None = None
    base_motion: BaseMotionProfile = field(default_factory=BaseMotionProfile)
    target: TargetProfile = field(default_factory=TargetProfile)
    command: CommandProfile = field(default_factory=CommandProfile)
    rate_command: RateCommandProfile = field(default_factory=RateCommandProfile)
    psi0: float = 0.0
    theta0: float = 0.0
    duration: float = 5.0
    dt: float = 1e-3
    control_period: float = 1e-3
    log_period: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.duration <= 0:
            raise ConfigError("run.duration must be positive")
        if self.dt <= 0 or self.control_period <= 0 or self.log_period <= 0:
            raise ConfigError("run.dt, run.control_period and run.log_period must be positive")
        for name, period in (("run.control_period", self.control_period), ("run.log_period", self.log_period)):
            n = round(period / self.dt)
            if n < 1 or abs(n * self.dt - period) > 1e-9 * period:
                raise ConfigError(f"{name} must be a multiple of run.dt")
        if abs(round(self.log_period / self.control_period) * self.control_period - self.log_period) > 1e-12:
            raise ConfigError("run.log_period must be a multiple of run.control_period")
        g = round(1.0 / (self.gyro.sample_rate * self.control_period))
        if g < 1 or abs(g * self.control_period * self.gyro.sample_rate - 1.0) > 1e-9:
            raise ConfigError("sensors.gyro.sample_rate must divide the control rate")
        if self.seed < 0:
            raise ConfigError("run.seed must be a non-negative integer")

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(copy.deepcopy(self), **changes)


# -- controller design -------------------------------------------------------


def stabilization_plant(inertia: float, motor: MotorParams, viscous: float) -> TransferFunction:
    """Voltage to inertial rate of one axis: rigid body, viscous and back-EMF damping."""
    return TransferFunction([motor.torque_per_volt], [inertia, viscous + motor.damping])


def tracking_plant(stab_closed_loop: TransferFunction, camera: CameraModel) -> TransferFunction:
    """Rate command to measured pointing angle.

    The camera is modelled as a delay of the processing time plus half a
    frame period (sample-and-hold), approximated by a second-order Pade.
    """
    delay = camera.processing_delay + 0.5 / camera.frame_rate
    integrator = TransferFunction([1.0], [1.0, 0.0])
    return stab_closed_loop * integrator * pade(delay, 2)


@dataclass
class ControllerSet:
    """Discretised controllers plus the continuous designs behind them."""

    stabilization: dict
    tracking: dict
    designs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "stabilization": {ch: c.to_dict() for ch, c in self.stabilization.items()},
            "tracking": {ch: c.to_dict() for ch, c in self.tracking.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ControllerSet":
        try:
            return cls(
                stabilization={ch: DiscreteController.from_dict(d["stabilization"][ch]) for ch in ("yaw", "pitch")},
                tracking={ch: DiscreteController.from_dict(d["tracking"][ch]) for ch in ("yaw", "pitch")},
            )
        except KeyError as exc:
            raise ConfigError(f"controllers.designed is missing key {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"controllers.designed is malformed: {exc}") from None

    def report(self) -> dict:
        return {role: {ch: d.report() for ch, d in per.items()} for role, per in self.designs.items()}


def _axis_inertias(sc: Scenario) -> dict:
    g = sc.gimbal
    return {
        "pitch": (g.inertia_p.Iyy, sc.motor_pitch, g.friction_pitch.viscous_coeff),
        "yaw": (g.inertia_g.Izz + g.inertia_p.Izz, sc.motor_yaw, g.friction_yaw.viscous_coeff),
    }


def design_controllers(sc: Scenario) -> ControllerSet:
    """Design and discretise all four loops for a scenario.

    Plants are linearised at ``theta = 0``. Raises
    :class:`~ispsim.control.DesignError` when a spec cannot be met.
    """
    stab, track, designs = {}, {}, {"stabilization": {}, "tracking": {}}
    frame_period = 1.0 / sc.camera.frame_rate
    for ch, (J, motor, visc) in _axis_inertias(sc).items():
        plant = stabilization_plant(J, motor, visc)
        d_s: LoopDesign = design_loop(plant, sc.stab_spec)
        stab[ch] = tustin_discretize(d_s.controller, sc.control_period, u_min=-motor.supply_limit,
                                     u_max=motor.supply_limit)
        inner = (d_s.controller * plant).feedback()
        d_t = design_loop(tracking_plant(inner, sc.camera), sc.track_spec)
        track[ch] = tustin_discretize(d_t.controller, frame_period, u_min=-sc.rate_limit, u_max=sc.rate_limit)
        designs["stabilization"][ch] = d_s
        designs["tracking"][ch] = d_t
    return ControllerSet(stab, track, designs)


def build_cascade(sc: Scenario, controllers: ControllerSet | None = None) -> CascadeController:
    if controllers is None:
        controllers = ControllerSet.from_dict(sc.controllers) if sc.controllers else design_controllers(sc)
    c = copy.deepcopy(controllers)
    for ctrl in list(c.stabilization.values()) + list(c.tracking.values()):
        ctrl.reset()
    return CascadeController(
        stab_yaw=c.stabilization["yaw"],
        stab_pitch=c.stabilization["pitch"],
        track_yaw=c.tracking["yaw"],
        track_pitch=c.tracking["pitch"],
        stabilization_enabled=sc.stabilization_enabled,
    )


# -- YAML mapping ------------------------------------------------------------

_SUFFIX = {"_deg": DEG, "_dps": DEG}


def _fields(cls, data, path, skip=()):
    """Keyword arguments for dataclass ``cls`` from a mapping, with unit suffixes."""
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must be a mapping")
    names = {f.name for f in dataclasses.fields(cls) if not f.name.startswith("_")} - set(skip)
    out = {}
    for key, value in data.items():
        name, scale = key, None
        for suf, s in _SUFFIX.items():
            if key.endswith(suf) and key[: -len(suf)] in names:
                name, scale = key[: -len(suf)], s
        if name not in names:
            raise ConfigError(f"unknown key {path}.{key}")
        if scale is not None:
            value = _number(value, f"{path}.{key}") * scale
        out[name] = value
    return out


def _number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path} must be a number, got {value!r}")
    return float(value)


def _make(cls, data, path, **extra):
    kwargs = _fields(cls, data, path, skip=extra.keys())
    kwargs.update(extra)
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _section(data, key, allowed):
    sec = data.get(key) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{key} must be a mapping")
    for k in sec:
        if k not in allowed:
            raise ConfigError(f"unknown key {key}.{k}")
    return sec


def scenario_from_dict(data: dict, base_dir: Path | None = None) -> Scenario:
    """Build a :class:`Scenario` from a parsed configuration mapping."""
    if not isinstance(data, dict):
        raise ConfigError("scenario file must contain a mapping")
    top = {"name", "bodies", "motors", "sensors", "camera", "controllers", "profiles", "run"}
    for k in data:
        if k not in top:
            raise ConfigError(f"unknown key {k}")

    bodies = _section(data, "bodies", {"platform", "gimbal", "friction_pitch", "friction_yaw"})
    gimbal = GimbalModel(
        inertia_p=_make(InertiaTensor, bodies.get("platform"), "bodies.platform", body="platform")
        if "platform" in bodies else GimbalModel().inertia_p,
        inertia_g=_make(InertiaTensor, bodies.get("gimbal"), "bodies.gimbal", body="gimbal")
        if "gimbal" in bodies else GimbalModel().inertia_g,
        friction_pitch=_make(FrictionModel, bodies.get("friction_pitch"), "bodies.friction_pitch"),
        friction_yaw=_make(FrictionModel, bodies.get("friction_yaw"), "bodies.friction_yaw"),
    )
    motors = _section(data, "motors", {"pitch", "yaw"})
    sensors = _section(data, "sensors", {"gyro", "pot"})
    ctrl = _section(data, "controllers", {"stabilization_spec", "tracking_spec", "stabilization_enabled",
                                          "tracking_enabled", "rate_limit", "designed"})
    prof = _section(data, "profiles", {"base_motion", "target", "command", "rate_command"})
    run = _section(data, "run", {"duration", "dt", "control_period", "log_period", "seed", "psi", "theta",
                                 "psi_deg", "theta_deg", "lock_joints"})

    if run.get("lock_joints"):
        gimbal = dataclasses.replace(gimbal, lock_joints=True)

    bm = dict(prof.get("base_motion") or {})
    if bm.get("csv") and base_dir is not None and not Path(bm["csv"]).is_absolute():
        bm["csv"] = str(Path(base_dir) / bm["csv"])
    comps = []
    for i, c in enumerate(bm.pop("components", []) or []):
        comps.append(_fields(SineComponent, c, f"profiles.base_motion.components[{i}]"))
    base_motion = _make(BaseMotionProfile, bm, "profiles.base_motion", components=comps)

    def spec(key, default):
        if key not in ctrl:
            return default
        merged = dataclasses.asdict(default)
        merged.update(_fields(LoopSpec, ctrl[key], f"controllers.{key}"))
        return _make(LoopSpec, merged, f"controllers.{key}")

    designed = ctrl.get("designed")
    if designed is not None:
        ControllerSet.from_dict(designed)  # validate eagerly

    kw = dict(
        name=str(data.get("name", "scenario")),
        gimbal=gimbal,
        motor_pitch=_make(MotorParams, motors.get("pitch"), "motors.pitch"),
        motor_yaw=_make(MotorParams, motors.get("yaw"), "motors.yaw"),
        gyro=_make(GyroModel, sensors.get("gyro"), "sensors.gyro"),
        pot=_make(PotModel, sensors.get("pot"), "sensors.pot"),
        camera=_make(CameraModel, data.get("camera"), "camera"),
        stab_spec=spec("stabilization_spec", DEFAULT_STAB_SPEC),
        track_spec=spec("tracking_spec", DEFAULT_TRACK_SPEC),
        controllers=designed,
        base_motion=base_motion,
        target=_make(TargetProfile, prof.get("target"), "profiles.target"),
        command=_make(CommandProfile, prof.get("command"), "profiles.command"),
        rate_command=_make(RateCommandProfile, prof.get("rate_command"), "profiles.rate_command"),
    )
    for key in ("stabilization_enabled", "tracking_enabled"):
        if key in ctrl:
            kw[key] = bool(ctrl[key])
    if "rate_limit" in ctrl:
        kw["rate_limit"] = _number(ctrl["rate_limit"], "controllers.rate_limit")
    angles = _fields(_Angles, {k: v for k, v in run.items() if k.startswith(("psi", "theta"))}, "run")
    kw["psi0"] = float(angles.get("psi", 0.0))
    kw["theta0"] = float(angles.get("theta", 0.0))
    for key in ("duration", "dt", "control_period", "log_period"):
        if key in run:
            kw[key] = _number(run[key], f"run.{key}")
    if "seed" in run:
        if isinstance(run["seed"], bool) or not isinstance(run["seed"], int):
            raise ConfigError("run.seed must be a non-negative integer")
        kw["seed"] = run["seed"]
    try:
        return Scenario(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


@dataclass
class _Angles:
    psi: float = 0.0
    theta: float = 0.0


def _plain(obj):
    d = dataclasses.asdict(obj)
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items() if not k.startswith("_")}


def scenario_to_dict(sc: Scenario) -> dict:
    """Inverse of :func:`scenario_from_dict` (SI units throughout)."""
    g = sc.gimbal
    bm = {"kind": sc.base_motion.kind, "components": [_plain(c) for c in sc.base_motion.components]}
    if sc.base_motion.kind == "recorded":
        if sc.base_motion.csv:
            bm["csv"] = sc.base_motion.csv
        else:
            bm["times"] = [float(v) for v in sc.base_motion.times]
            bm["rates"] = [[float(x) for x in row] for row in sc.base_motion.rates]
    target = _plain(sc.target)
    out = {
        "name": sc.name,
        "bodies": {
            "platform": {k: v for k, v in _plain(g.inertia_p).items() if k != "body"},
            "gimbal": {k: v for k, v in _plain(g.inertia_g).items() if k != "body"},
            "friction_pitch": _plain(g.friction_pitch),
            "friction_yaw": _plain(g.friction_yaw),
        },
        "motors": {"pitch": _plain(sc.motor_pitch), "yaw": _plain(sc.motor_yaw)},
        "sensors": {"gyro": _plain(sc.gyro), "pot": _plain(sc.pot)},
        "camera": _plain(sc.camera),
        "controllers": {
            "stabilization_spec": _plain(sc.stab_spec),
            "tracking_spec": _plain(sc.track_spec),
            "stabilization_enabled": sc.stabilization_enabled,
            "tracking_enabled": sc.tracking_enabled,
            "rate_limit": sc.rate_limit,
        },
        "profiles": {
            "base_motion": bm,
            "target": target,
            "command": _plain(sc.command),
            "rate_command": _plain(sc.rate_command),
        },
        "run": {
            "duration": sc.duration,
            "dt": sc.dt,
            "control_period": sc.control_period,
            "log_period": sc.log_period,
            "seed": sc.seed,
            "psi": sc.psi0,
            "theta": sc.theta0,
            "lock_joints": g.lock_joints,
        },
    }
    if sc.controllers is not None:
        out["controllers"]["designed"] = sc.controllers
    return out


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    return scenario_from_dict(data, base_dir=path.parent)


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(yaml.safe_dump(scenario_to_dict(sc), sort_keys=False))


def bundled_scenarios() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("ispsim.scenarios").iterdir() if p.name.endswith(".yaml"))


def bundled_scenario_path(name: str) -> Path:
    p = resources.files("ispsim.scenarios") / f"{name}.yaml"
    if not p.is_file():
        raise ConfigError(f"no bundled scenario named {name!r}")
    return Path(str(p))
