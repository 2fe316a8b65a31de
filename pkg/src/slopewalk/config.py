"""YAML run configuration.

Six sections are required: ``robot``, ``gait``, ``policy``, ``env``, ``ars`` and
``experiment`` (an empty mapping takes every default).  ``output_dir`` is an
optional top-level key.  Angles are written in degrees and carry a ``_deg``
suffix; everything is radians once loaded.  Unknown keys are errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .ars import ArsConfig
from .env import ContactParams, EnvConfig, PerturbationSchedule, RewardWeights
from .gait import GaitConfig
from .policy import MODES, SeedGains, _base_name, act_names, default_clip_bounds
from .robot_model import RobotModel

SECTIONS = ("robot", "gait", "policy", "env", "ars", "experiment")
ANGLE_BOUNDS = ("steering",)


class ConfigError(ValueError):
    pass


class _Mapping(dict):
    """dict that remembers the source line of each key."""

    lines: dict


class _Loader(yaml.SafeLoader):
    pass


def _construct_mapping(loader, node):
    loader.flatten_mapping(node)
    out = _Mapping()
    out.lines = {}
    for key_node, value_node in node.value:
        key = loader.construct_object(key_node, deep=True)
        if key in out:
            raise ConfigError(f"line {key_node.start_mark.line + 1}: duplicate key {key!r}")
        out[key] = loader.construct_object(value_node, deep=True)
        out.lines[key] = key_node.start_mark.line + 1
    out.lines["__self__"] = node.start_mark.line + 1
    return out


_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


@dataclass(frozen=True)
class PolicySettings:
    mode: str = "reduced"
    clip_bounds: np.ndarray = field(default_factory=lambda: default_clip_bounds("reduced"))
    gains: SeedGains = field(default_factory=SeedGains)

    def __eq__(self, other):
        return (isinstance(other, PolicySettings) and self.mode == other.mode
                and np.array_equal(self.clip_bounds, other.clip_bounds) and self.gains == other.gains)


@dataclass(frozen=True)
class Experiment:
    tracks: tuple[str, ...] = ("flat", "7deg")
    seed: int = 0
    ramp_length: float = 1.0
    plateau_length: float = 1.0
    perturbation: str = "impulse"
    force: float = 10.0
    duration: float = 0.1
    t_start: float = 3.0
    period: float = 1.0
    until: float = 10.0
    recovery_band: float = math.radians(2.0)
    recovery_hold: float = 1.0

    def schedule(self, force: float | None = None, duration: float | None = None,
                 t_start: float | None = None) -> PerturbationSchedule:
        f = self.force if force is None else force
        d = self.duration if duration is None else duration
        t0 = self.t_start if t_start is None else t_start
        if self.perturbation == "periodic":
            return PerturbationSchedule.periodic(f, d, t0, self.period, self.until)
        return PerturbationSchedule.impulse(f, d, t0)


@dataclass(frozen=True)
class RunConfig:
    model: RobotModel = field(default_factory=RobotModel)
    gait: GaitConfig = field(default_factory=GaitConfig)
    policy: PolicySettings = field(default_factory=PolicySettings)
    env: EnvConfig = field(default_factory=EnvConfig)
    ars: ArsConfig = field(default_factory=ArsConfig)
    experiment: Experiment = field(default_factory=Experiment)
    output_dir: str = "runs"

    def to_dict(self) -> dict:
        return {
            "robot": _robot_out(self.model),
            "gait": _gait_out(self.gait),
            "policy": _policy_out(self.policy),
            "env": _env_out(self.env),
            "ars": _ars_out(self.ars),
            "experiment": _experiment_out(self.experiment),
            "output_dir": self.output_dir,
        }

    def dump(self, path=None) -> str:
        text = yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)
        if path is not None:
            Path(path).write_text(text)
        return text


# --- per-section readers/writers -----------------------------------------

def _deg(v):
    return [math.degrees(x) for x in v] if isinstance(v, (list, tuple)) else math.degrees(v)


def _robot_out(m: RobotModel) -> dict:
    return {
        "masses": [m.torso_mass, m.thigh_mass, m.shin_mass],
        "lengths": [m.torso_length, m.thigh_length, m.shin_length],
        "inertias": list(m.link_inertias),
        "com_offsets": list(m.com_offsets),
        "pd_kp": m.pd_gains[0],
        "pd_kd": m.pd_gains[1],
        "torque_limit": m.torque_limit,
        "joint_limits_deg": {"hip": _deg(m.joint_limits[0]), "knee": _deg(m.joint_limits[1])},
        "gravity": m.gravity,
    }


def _robot_in(d: dict) -> RobotModel:
    masses = _triple(d, "masses")
    lengths = _triple(d, "lengths")
    kw = {}
    if masses:
        kw.update(torso_mass=masses[0], thigh_mass=masses[1], shin_mass=masses[2])
    if lengths:
        kw.update(torso_length=lengths[0], thigh_length=lengths[1], shin_length=lengths[2])
    # inertias/COM offsets default from the (possibly new) masses and lengths
    if d.get("inertias") is not None:
        kw["link_inertias"] = tuple(_triple(d, "inertias"))
    if d.get("com_offsets") is not None:
        kw["com_offsets"] = tuple(_triple(d, "com_offsets"))
    base = RobotModel()
    kw["pd_gains"] = (float(d.get("pd_kp", base.pd_gains[0])), float(d.get("pd_kd", base.pd_gains[1])))
    if "torque_limit" in d:
        kw["torque_limit"] = float(d["torque_limit"])
    if "gravity" in d:
        kw["gravity"] = float(d["gravity"])
    if "joint_limits_deg" in d:
        jl = d["joint_limits_deg"]
        _check_keys(jl, {"hip", "knee"}, "robot.joint_limits_deg")
        hip = jl.get("hip", _deg(base.joint_limits[0]))
        knee = jl.get("knee", _deg(base.joint_limits[1]))
        kw["joint_limits"] = (tuple(math.radians(x) for x in hip), tuple(math.radians(x) for x in knee))
    return RobotModel(**kw)


def _gait_out(g: GaitConfig) -> dict:
    return {"period_s": g.period, "hip_height_m": g.hip_height,
            "swing_height_m": g.swing_height, "phase_offset": g.phase_offset}


def _gait_in(d: dict) -> GaitConfig:
    base = _gait_out(GaitConfig())
    v = {k: float(d.get(k, base[k])) for k in base}
    return GaitConfig(v["period_s"], v["hip_height_m"], v["swing_height_m"], v["phase_offset"])


_GAIN_ANGLES = ("roll_setpoint", "pitch_setpoint", "yaw_setpoint")


def _policy_out(p: PolicySettings) -> dict:
    gains = {}
    for k, v in vars(p.gains).items():
        if k in _GAIN_ANGLES:
            gains[k + "_deg"] = math.degrees(v)
        else:
            gains[k] = v
    bounds = {}
    names = _bound_names(p.mode)
    for name, (lo, hi) in zip(names, p.clip_bounds):
        bounds[name + ("_deg" if name in ANGLE_BOUNDS else "")] = (
            _deg([lo, hi]) if name in ANGLE_BOUNDS else [float(lo), float(hi)])
    return {"mode": p.mode, "clip_bounds": bounds, "seed_gains": gains}


def _bound_names(mode: str) -> list[str]:
    return [_base_name(n) for n in act_names(mode)]


def _policy_in(d: dict) -> PolicySettings:
    mode = d.get("mode", "reduced")
    if mode not in MODES:
        raise ConfigError(f"line {_line(d, 'mode')}: policy.mode must be one of {MODES}")
    bounds = {}
    raw_bounds = d.get("clip_bounds") or {}
    allowed = {n + ("_deg" if n in ANGLE_BOUNDS else "") for n in set(_bound_names("full"))}
    _check_keys(raw_bounds, allowed, "policy.clip_bounds")
    for k, v in raw_bounds.items():
        lo, hi = (float(x) for x in v)
        if k.endswith("_deg"):
            bounds[k[:-4]] = (math.radians(lo), math.radians(hi))
        else:
            bounds[k] = (lo, hi)
    raw_gains = d.get("seed_gains") or {}
    allowed = {k + "_deg" if k in _GAIN_ANGLES else k for k in vars(SeedGains())}
    _check_keys(raw_gains, allowed, "policy.seed_gains")
    gains = {}
    for k, v in raw_gains.items():
        if k.endswith("_deg"):
            gains[k[:-4]] = math.radians(float(v))
        else:
            gains[k] = float(v)
    return PolicySettings(mode, default_clip_bounds(mode, bounds), SeedGains(**gains))


def _bool(v, where: str) -> bool:
    if not isinstance(v, bool):
        raise ConfigError(f"{where}: expected true or false, got {v!r}")
    return v


def _env_out(e: EnvConfig) -> dict:
    c, r = e.contact, e.reward
    return {
        "dt": e.dt, "substeps": e.substeps, "episode_length": e.episode_length,
        "height_threshold": e.height_threshold, "pitch_threshold_deg": math.degrees(e.pitch_threshold),
        "max_velocity": e.max_velocity, "touchdown_airtime": e.touchdown_airtime,
        "initial_step_length": e.initial_step_length, "start_x_range": list(e.start_x_range),
        "start_pitch_range_deg": math.degrees(e.start_pitch_range), "reach_margin": e.reach_margin,
        "support_frame": e.support_frame,
        "contact": {"stiffness": c.stiffness, "damping": c.damping, "friction": c.friction,
                    "tangential_stiffness": c.tangential_stiffness,
                    "tangential_damping": c.tangential_damping},
        "reward": {"weights": list(r.w), "displacement": r.displacement,
                   "nominal_velocity": r.nominal_velocity, "com_height": r.com_height},
    }


def _env_in(d: dict) -> EnvConfig:
    base = _env_out(EnvConfig())
    contact = d.get("contact") or {}
    reward = d.get("reward") or {}
    _check_keys(contact, set(base["contact"]), "env.contact")
    _check_keys(reward, set(base["reward"]), "env.reward")
    cp = ContactParams(**{k: float(contact.get(k, v)) for k, v in base["contact"].items()})
    rw = RewardWeights(tuple(float(x) for x in reward.get("weights", base["reward"]["weights"])),
                       float(reward.get("displacement", base["reward"]["displacement"])),
                       float(reward.get("nominal_velocity", base["reward"]["nominal_velocity"])),
                       float(reward.get("com_height", base["reward"]["com_height"])))
    g = {k: d.get(k, base[k]) for k in base}
    return EnvConfig(
        dt=float(g["dt"]), substeps=int(g["substeps"]), episode_length=int(g["episode_length"]),
        contact=cp, reward=rw, height_threshold=float(g["height_threshold"]),
        pitch_threshold=math.radians(float(g["pitch_threshold_deg"])),
        max_velocity=float(g["max_velocity"]), touchdown_airtime=float(g["touchdown_airtime"]),
        initial_step_length=float(g["initial_step_length"]),
        start_x_range=tuple(float(x) for x in g["start_x_range"]),
        start_pitch_range=math.radians(float(g["start_pitch_range_deg"])),
        reach_margin=float(g["reach_margin"]), support_frame=_bool(g["support_frame"], "env.support_frame"))


def _ars_out(a: ArsConfig) -> dict:
    return {"step_size": a.step_size, "noise": a.noise, "directions": a.directions,
            "top_directions": a.top_directions, "iterations": a.iterations,
            "episode_length": a.episode_length, "seed": a.rng_seed,
            "inclines_deg": _deg(list(a.inclines)), "plateau_tol": a.plateau_tol,
            "plateau_window": a.plateau_window, "checkpoint_every": a.checkpoint_every,
            "workers": a.workers}


def _ars_in(d: dict) -> ArsConfig:
    b = _ars_out(ArsConfig())
    g = {k: d.get(k, b[k]) for k in b}
    return ArsConfig(
        step_size=float(g["step_size"]), noise=float(g["noise"]), directions=int(g["directions"]),
        top_directions=int(g["top_directions"]), iterations=int(g["iterations"]),
        episode_length=int(g["episode_length"]), rng_seed=int(g["seed"]),
        inclines=tuple(math.radians(float(x)) for x in g["inclines_deg"]),
        plateau_tol=float(g["plateau_tol"]), plateau_window=int(g["plateau_window"]),
        checkpoint_every=int(g["checkpoint_every"]), workers=int(g["workers"]))


def _experiment_out(x: Experiment) -> dict:
    return {"tracks": list(x.tracks), "seed": x.seed, "ramp_length": x.ramp_length,
            "plateau_length": x.plateau_length, "perturbation": x.perturbation,
            "force_n": x.force, "duration_s": x.duration, "t_start_s": x.t_start,
            "period_s": x.period, "until_s": x.until,
            "recovery_band_deg": math.degrees(x.recovery_band), "recovery_hold_s": x.recovery_hold}


def _experiment_in(d: dict) -> Experiment:
    b = _experiment_out(Experiment())
    g = {k: d.get(k, b[k]) for k in b}
    if g["perturbation"] not in ("impulse", "periodic"):
        raise ConfigError(f"line {_line(d, 'perturbation')}: perturbation must be impulse or periodic")
    tracks = g["tracks"]
    if isinstance(tracks, str):
        tracks = [tracks]
    return Experiment(
        tracks=tuple(str(t) for t in tracks), seed=int(g["seed"]),
        ramp_length=float(g["ramp_length"]), plateau_length=float(g["plateau_length"]),
        perturbation=str(g["perturbation"]), force=float(g["force_n"]),
        duration=float(g["duration_s"]), t_start=float(g["t_start_s"]),
        period=float(g["period_s"]), until=float(g["until_s"]),
        recovery_band=math.radians(float(g["recovery_band_deg"])),
        recovery_hold=float(g["recovery_hold_s"]))


_READERS = {"robot": (_robot_in, _robot_out(RobotModel())), "gait": (_gait_in, _gait_out(GaitConfig())),
            "policy": (_policy_in, _policy_out(PolicySettings())), "env": (_env_in, _env_out(EnvConfig())),
            "ars": (_ars_in, _ars_out(ArsConfig())),
            "experiment": (_experiment_in, _experiment_out(Experiment()))}


# --- helpers --------------------------------------------------------------

def _line(d, key=None):
    lines = getattr(d, "lines", {})
    return lines.get(key, lines.get("__self__", "?"))


def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"line {_line(d)}: {where} must be a mapping")
    for k in d:
        if k not in allowed:
            raise ConfigError(f"line {_line(d, k)}: unknown key {k!r} in {where}")


def _triple(d, key):
    if key not in d:
        return None
    v = d[key]
    if not isinstance(v, (list, tuple)) or len(v) != 3:
        raise ConfigError(f"line {_line(d, key)}: {key} needs three values (torso, thigh, shin)")
    return [float(x) for x in v]


def config_from_dict(data) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("line 1: config must be a mapping of sections")
    _check_keys(data, set(SECTIONS) | {"output_dir"}, "config")
    sections = {}
    for name in SECTIONS:
        if name not in data:
            raise ConfigError(f"line {_line(data)}: missing required section {name!r}")
        body = data[name] if data[name] is not None else {}
        reader, defaults = _READERS[name]
        _check_keys(body, set(defaults), name)
        try:
            sections[name] = reader(body)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"line {_line(data, name)}: section {name!r}: {exc}") from None
    return RunConfig(sections["robot"], sections["gait"], sections["policy"], sections["env"],
                     sections["ars"], sections["experiment"], str(data.get("output_dir", "runs")))


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        data = yaml.load(text, Loader=_Loader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        raise ConfigError(f"{path}: line {mark.line + 1}: {exc.problem}") from None
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    try:
        return config_from_dict(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def default_config() -> RunConfig:
    return RunConfig()


def with_seed(cfg: RunConfig, seed: int) -> RunConfig:
    return replace(cfg, ars=replace(cfg.ars, rng_seed=seed),
                   experiment=replace(cfg.experiment, seed=seed))
