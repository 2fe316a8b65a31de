"""Observations, the affine trajectory-modulating policy and its hand-designed seed."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gait import GaitAction

FULL_OBS = ("roll", "pitch", "yaw", "roll_rate", "pitch_rate", "yaw_rate",
            "support_roll", "support_pitch")
REDUCED_OBS = ("pitch", "pitch_rate", "support_pitch")
LEG_ACT = ("step_length", "steering", "shift_x", "shift_y", "shift_z")
FULL_ACT = tuple(f"{n}_{leg}" for leg in ("left", "right") for n in LEG_ACT)
REDUCED_ACT = ("step_length", "shift_x", "shift_z")
MODES = ("reduced", "full")

DEFAULT_BOUNDS = {
    "step_length": (-0.3, 0.4),
    "steering": (-0.5, 0.5),
    "shift_x": (-0.2, 0.2),
    "shift_y": (-0.12, 0.12),
    "shift_z": (-0.12, 0.12),
}


class DimensionMismatch(ValueError):
    pass


def obs_names(mode: str) -> tuple[str, ...]:
    return REDUCED_OBS if mode == "reduced" else FULL_OBS


def act_names(mode: str) -> tuple[str, ...]:
    return REDUCED_ACT if mode == "reduced" else FULL_ACT


def _base_name(action_name: str) -> str:
    return action_name.rsplit("_", 1)[0] if action_name.endswith(("_left", "_right")) else action_name


def default_clip_bounds(mode: str, bounds: dict | None = None) -> np.ndarray:
    table = dict(DEFAULT_BOUNDS)
    table.update(bounds or {})
    return np.array([table[_base_name(n)] for n in act_names(mode)], dtype=np.float64)


@dataclass(frozen=True)
class Observation:
    """Full eight-entry state; the planar robot leaves roll/yaw terms at zero."""

    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0
    roll_rate: float = 0.0
    pitch_rate: float = 0.0
    yaw_rate: float = 0.0
    support_roll: float = 0.0
    support_pitch: float = 0.0

    def full(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in FULL_OBS], dtype=np.float64)

    def reduced(self) -> np.ndarray:
        return np.array([self.pitch, self.pitch_rate, self.support_pitch], dtype=np.float64)

    def vector(self, mode: str) -> np.ndarray:
        return self.reduced() if mode == "reduced" else self.full()


def build_observation(sim_state, terrain_estimate: float, mode: str = "reduced") -> np.ndarray:
    """Observation vector for ``mode`` from a planar simulation state."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    obs = Observation(pitch=float(sim_state.q[2]), pitch_rate=float(sim_state.qd[2]),
                      support_pitch=float(terrain_estimate))
    return obs.vector(mode)


@dataclass(frozen=True)
class SeedGains:
    """Hand-tuned balance gains.  Defaults walk on flat ground with the default
    robot, gait and contact model; forward speed is set mainly by the pitch
    setpoint and is sensitive at the third decimal."""

    k_step: float = 2.3081
    k_step_rate: float = 0.5532
    k_shift_y: float = 0.0
    k_shift_y_rate: float = 0.0
    k_steer: float = 0.0
    k_steer_rate: float = 0.0
    k_shift_x: float = 0.6599
    k_shift_x_rate: float = -0.3278
    k_shift_z: float = -0.6
    roll_setpoint: float = 0.0
    pitch_setpoint: float = 0.1589
    yaw_setpoint: float = 0.0
    step_length: float = 0.3398


@dataclass(frozen=True, eq=False)
class AffinePolicy:
    """``action = matrix @ obs + offset``.  Only ``matrix`` is learnable."""

    matrix: np.ndarray
    offset: np.ndarray
    clip_bounds: np.ndarray
    mode: str = "reduced"

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64)
        b = np.array(self.offset, dtype=np.float64).reshape(-1)
        cb = np.array(self.clip_bounds, dtype=np.float64).reshape(-1, 2)
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        shape = (len(act_names(self.mode)), len(obs_names(self.mode)))
        if m.shape != shape:
            raise DimensionMismatch(f"{self.mode} policy needs a {shape} matrix, got {m.shape}")
        if b.shape != (shape[0],) or cb.shape != (shape[0], 2):
            raise DimensionMismatch("offset/clip bounds do not match the action dimension")
        if not np.all(np.isfinite(m)):
            raise ValueError("policy matrix must be finite")
        if np.any(cb[:, 0] >= cb[:, 1]):
            raise ValueError("clip bounds need lo < hi")
        for a in (m, b, cb):
            a.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "offset", b)
        object.__setattr__(self, "clip_bounds", cb)

    @property
    def obs_dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def act_dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_learnable(self) -> int:
        return self.matrix.size

    def with_matrix(self, matrix) -> "AffinePolicy":
        return AffinePolicy(matrix, self.offset, self.clip_bounds, self.mode)

    def __eq__(self, other):
        if not isinstance(other, AffinePolicy):
            return NotImplemented
        return (self.mode == other.mode and np.array_equal(self.matrix, other.matrix)
                and np.array_equal(self.offset, other.offset)
                and np.array_equal(self.clip_bounds, other.clip_bounds))

    @classmethod
    def zeros(cls, mode: str = "reduced", clip_bounds=None) -> "AffinePolicy":
        shape = (len(act_names(mode)), len(obs_names(mode)))
        cb = default_clip_bounds(mode) if clip_bounds is None else clip_bounds
        return cls(np.zeros(shape), np.zeros(shape[0]), cb, mode)


def evaluate(policy: AffinePolicy, s) -> np.ndarray:
    """Raw (unclipped) action ``M s + b``."""
    if isinstance(s, Observation):
        s = s.vector(policy.mode)
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (policy.obs_dim,):
        raise DimensionMismatch(f"observation of shape {s.shape}, policy expects ({policy.obs_dim},)")
    return policy.matrix @ s + policy.offset


def clip_vector(raw, bounds, mode: str = "reduced", planar: bool = True) -> np.ndarray:
    """Componentwise clamp; in planar full mode steering and y-shift are zeroed."""
    bounds = np.asarray(bounds, dtype=np.float64)
    out = np.clip(np.asarray(raw, dtype=np.float64), bounds[:, 0], bounds[:, 1])
    if planar and mode == "full":
        for i, name in enumerate(FULL_ACT):
            if _base_name(name) in ("steering", "shift_y"):
                out[i] = 0.0
    return out


def to_gait_actions(vec, mode: str = "reduced") -> tuple[GaitAction, GaitAction]:
    """Per-leg (left, right) actions; reduced mode drives both legs with one set."""
    v = [float(a) for a in vec]
    if mode == "reduced":
        a = GaitAction(step_length=v[0], shift_x=v[1], shift_z=v[2])
        return a, a
    return GaitAction(*v[:5]), GaitAction(*v[5:])


def clip_action(raw, bounds, mode: str = "reduced", planar: bool = True) -> tuple[GaitAction, GaitAction]:
    return to_gait_actions(clip_vector(raw, bounds, mode, planar), mode)


def build_seed_policy(gains: SeedGains, mode: str = "reduced", clip_bounds=None) -> AffinePolicy:
    """Sparse gain matrix encoding the step-length, shift and steering feedback laws.

    Setpoint products and the nominal step length go into the fixed offset.
    """
    g = gains
    obs = obs_names(mode)
    acts = act_names(mode)
    m = np.zeros((len(acts), len(obs)))
    b = np.zeros(len(acts))
    for i, name in enumerate(acts):
        base = _base_name(name)
        if base == "step_length":
            m[i, obs.index("pitch")] = g.k_step
            m[i, obs.index("pitch_rate")] = g.k_step_rate
            b[i] = g.step_length - g.k_step * g.pitch_setpoint
        elif base == "shift_x":
            m[i, obs.index("pitch")] = g.k_shift_x
            m[i, obs.index("pitch_rate")] = g.k_shift_x_rate
            m[i, obs.index("support_pitch")] = -g.k_shift_x
            b[i] = -g.k_shift_x * g.pitch_setpoint
        elif base == "shift_z":
            m[i, obs.index("support_pitch")] = g.k_shift_z
        elif base == "shift_y":
            m[i, obs.index("roll")] = g.k_shift_y
            m[i, obs.index("roll_rate")] = g.k_shift_y_rate
            b[i] = -g.k_shift_y * g.roll_setpoint
        elif base == "steering":
            m[i, obs.index("yaw")] = g.k_steer
            m[i, obs.index("yaw_rate")] = g.k_steer_rate
            b[i] = -g.k_steer * g.yaw_setpoint
    cb = default_clip_bounds(mode) if clip_bounds is None else clip_bounds
    policy = AffinePolicy(m, b, cb, mode)
    lo, hi = policy.clip_bounds[acts.index(act_names(mode)[0])]
    if not lo <= g.step_length <= hi:
        raise ValueError("nominal step length lies outside the step-length clip bounds")
    return policy


def policy_to_dict(policy: AffinePolicy) -> dict:
    return {
        "obs_dim": policy.obs_dim,
        "act_dim": policy.act_dim,
        "mode": policy.mode,
        "M": [float(v) for v in policy.matrix.ravel()],
        "b": [float(v) for v in policy.offset],
        "clip_bounds": [[float(lo), float(hi)] for lo, hi in policy.clip_bounds],
    }


def policy_from_dict(d: dict) -> AffinePolicy:
    try:
        obs_dim, act_dim, mode = int(d["obs_dim"]), int(d["act_dim"]), str(d["mode"])
        m = np.array(d["M"], dtype=np.float64)
        if m.size != obs_dim * act_dim:
            raise DimensionMismatch(f"M has {m.size} entries, expected {act_dim}x{obs_dim}")
        return AffinePolicy(m.reshape(act_dim, obs_dim), d["b"], d["clip_bounds"], mode)
    except KeyError as exc:
        raise ValueError(f"policy file missing key {exc}") from None


def save_policy(policy: AffinePolicy, path) -> None:
    Path(path).write_text(json.dumps(policy_to_dict(policy), indent=2) + "\n")


def load_policy(path) -> AffinePolicy:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a JSON object")
    return policy_from_dict(data)
