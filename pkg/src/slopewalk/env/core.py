"""Rollout environment: state, PD tracking, reward, termination and episodes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..gait import GaitConfig, ellipse_point
from ..policy import AffinePolicy
from ..robot_model import LEFT, RIGHT, ContactRecord, RobotModel, inverse_kinematics
from . import kernel
from .terrain import Terrain

LOG_COLUMNS = ("t", "torso_x", "torso_z", "pitch_deg", "pitch_rate", "phase", "reward", "dist",
               "contact_L", "contact_R", "l_cmd", "xshift_cmd", "zshift_cmd", "alpha_est_deg",
               "force_ext")

TERMINATION = {kernel.ALIVE: "alive", kernel.FELL_LOW: "fell_low", kernel.TOPPLED: "toppled",
               kernel.DIVERGED: "diverged", kernel.TIME_UP: "time_up"}


class NumericalDivergence(RuntimeError):
    pass


@dataclass(frozen=True)
class ContactParams:
    stiffness: float = 2.0e6
    damping: float = 4000.0
    friction: float = 0.8
    tangential_stiffness: float = 1.0e5
    tangential_damping: float = 500.0

    def as_array(self) -> np.ndarray:
        return np.array([self.stiffness, self.damping, self.friction,
                         self.tangential_stiffness, self.tangential_damping])


@dataclass(frozen=True)
class RewardWeights:
    w: tuple[float, float, float, float, float] = (4.0, 4.0, 4.0, 10.0, 8.0)
    displacement: float = 30.0
    nominal_velocity: float = 0.35
    com_height: float = 0.64

    def __post_init__(self):
        if len(self.w) != 5 or min(self.w) <= 0:
            raise ValueError("need five strictly positive kernel widths")

    def as_array(self) -> np.ndarray:
        return np.array([*self.w, self.displacement, self.nominal_velocity, self.com_height])


@dataclass(frozen=True)
class EnvConfig:
    dt: float = 0.0005
    substeps: int = 2
    episode_length: int = 10_000
    contact: ContactParams = field(default_factory=ContactParams)
    reward: RewardWeights = field(default_factory=RewardWeights)
    height_threshold: float = 0.4
    pitch_threshold: float = math.radians(45.0)
    max_velocity: float = 200.0
    touchdown_airtime: float = 0.05
    initial_step_length: float = 0.15
    start_x_range: tuple[float, float] = (0.0, 0.0)
    start_pitch_range: float = math.radians(2.0)
    reach_margin: float = 0.005
    support_frame: bool = True

    @property
    def control_dt(self) -> float:
        return self.dt * self.substeps


@dataclass(frozen=True)
class PerturbationSchedule:
    """Horizontal pushes on the torso COM: rows of ``(t_start, duration, force)``."""

    windows: tuple[tuple[float, float, float], ...] = ()

    def __post_init__(self):
        w = tuple(sorted((float(a), float(b), float(c)) for a, b, c in self.windows))
        for (t0, d0, _), (t1, _, _) in zip(w, w[1:]):
            if t0 + d0 > t1:
                raise ValueError("perturbation windows overlap")
        if any(d < 0 for _, d, _ in w):
            raise ValueError("durations must be non-negative")
        object.__setattr__(self, "windows", w)

    @classmethod
    def impulse(cls, force: float, duration: float, t_start: float) -> "PerturbationSchedule":
        return cls(((t_start, duration, force),))

    @classmethod
    def periodic(cls, force: float, duration: float, t_start: float, period: float,
                 until: float) -> "PerturbationSchedule":
        if period < duration:
            raise ValueError("period must be at least the push duration")
        starts = np.arange(t_start, until, period)
        return cls(tuple((float(t), duration, force) for t in starts))

    def force_at(self, t: float) -> float:
        return sum(f for t0, d, f in self.windows if t0 <= t < t0 + d)

    def as_array(self) -> np.ndarray:
        return np.array(self.windows, dtype=np.float64).reshape(-1, 3)


@dataclass
class SimState:
    q: np.ndarray
    qd: np.ndarray
    phase: float = 0.0
    t: float = 0.0
    contact: np.ndarray = field(default_factory=lambda: np.zeros(2, dtype=bool))
    anchor: np.ndarray = field(default_factory=lambda: np.zeros((2, 2)))
    contacts: tuple[ContactRecord, ...] = ()

    def copy(self) -> "SimState":
        return SimState(self.q.copy(), self.qd.copy(), self.phase, self.t, self.contact.copy(),
                        self.anchor.copy(), self.contacts)

    @property
    def pitch(self) -> float:
        return float(self.q[2])


@dataclass
class EpisodeResult:
    total_return: float
    steps: int
    distance: float
    termination: str
    final_state: SimState
    log: np.ndarray | None = None
    stats: dict = field(default_factory=dict)

    @property
    def fell(self) -> bool:
        return self.termination in ("fell_low", "toppled", "diverged")

    def write_csv(self, path) -> None:
        if self.log is None:
            raise ValueError("episode was run without logging")
        write_log_csv(self.log, path)


def write_log_csv(log: np.ndarray, path) -> None:
    lines = [",".join(LOG_COLUMNS)]
    for row in log:
        lines.append(",".join(f"{v:.9g}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _sim_arrays(model: RobotModel, gait: GaitConfig, config: EnvConfig):
    r_min, r_max = model.leg_reach
    (hip_lo, hip_hi), (knee_lo, knee_hi) = model.joint_limits
    G = np.array([gait.period, gait.hip_height, gait.swing_height, gait.phase_offset,
                  1.0 if config.support_frame else 0.0])
    R = np.array([r_min + config.reach_margin, r_max - config.reach_margin,
                  model.thigh_length, model.shin_length, hip_lo, hip_hi, knee_lo, knee_hi])
    K = np.array([model.pd_gains[0], model.pd_gains[1], model.torque_limit])
    T = np.array([config.height_threshold, config.pitch_threshold, config.max_velocity])
    return model.as_array(), G, R, K, config.contact.as_array(), config.reward.as_array(), T


def _policy_arrays(policy: AffinePolicy):
    if policy.mode == "reduced":
        obs_idx = np.array([1, 4, 7])
        leg_idx = np.array([[0, 1, 2], [0, 1, 2]])
        zero_idx = np.zeros(0, dtype=np.int64)
    else:
        obs_idx = np.arange(8)
        leg_idx = np.array([[0, 2, 4], [5, 7, 9]])
        zero_idx = np.array([1, 3, 6, 8])
    cb = policy.clip_bounds
    return (np.ascontiguousarray(policy.matrix), np.ascontiguousarray(policy.offset),
            np.ascontiguousarray(cb[:, 0]), np.ascontiguousarray(cb[:, 1]),
            obs_idx.astype(np.int64), leg_idx.astype(np.int64), zero_idx.astype(np.int64))


def initial_state(terrain: Terrain, seed: int | None = None, *, model: RobotModel | None = None,
                  gait: GaitConfig | None = None, config: EnvConfig | None = None) -> SimState:
    """Standing pose with both feet on the surface at the gait's start phase.

    ``seed=None`` gives the canonical stand at x=0 with an upright torso;
    otherwise x is drawn from ``config.start_x_range`` and pitch from
    ``+-config.start_pitch_range``.
    """
    model = model or RobotModel()
    gait = gait or GaitConfig()
    config = config or EnvConfig()
    x0, pitch = 0.0, 0.0
    if seed is not None:
        rng = np.random.default_rng(seed)
        lo, hi = config.start_x_range
        x0 = float(rng.uniform(lo, hi)) if hi > lo else float(lo)
        pitch = float(rng.uniform(-config.start_pitch_range, config.start_pitch_range))
    step = config.initial_step_length
    # left leg starts stance at the front, right leg starts swing at the back
    dx = {LEFT: ellipse_point(0.0, step, gait.hip_height, gait.swing_height)[0],
          RIGHT: ellipse_point(gait.phase_offset, step, gait.hip_height, gait.swing_height)[0]}
    feet = {leg: (x0 + d, terrain.height(x0 + d)) for leg, d in dx.items()}
    hip = np.array([x0, 0.5 * (feet[LEFT][1] + feet[RIGHT][1]) + gait.hip_height])
    c, s = math.cos(pitch), math.sin(pitch)
    q = np.zeros(7)
    q[0], q[1], q[2] = hip[0], hip[1], pitch
    for leg in (LEFT, RIGHT):
        wx, wz = feet[leg][0] - hip[0], feet[leg][1] - hip[1]
        bx, bz = c * wx - s * wz, s * wx + c * wz
        q[3 + 2 * leg], q[4 + 2 * leg] = inverse_kinematics(bx, bz, model)
    contact = np.ones(2, dtype=bool)
    anchor = np.array([feet[LEFT], feet[RIGHT]], dtype=np.float64)
    return SimState(q, np.zeros(7), phase=0.0, t=0.0, contact=contact, anchor=anchor)


def pd_torques(state: SimState, targets, model: RobotModel) -> np.ndarray:
    kp, kd = model.pd_gains
    q = state.q[3:]
    qd = state.qd[3:]
    tau = kp * (np.asarray(targets, dtype=np.float64) - q) - kd * qd
    return np.clip(tau, -model.torque_limit, model.torque_limit)


def dynamics_step(state: SimState, torques, external_force: float, dt: float, *,
                  model: RobotModel, terrain: Terrain,
                  contact: ContactParams | None = None) -> tuple[SimState, np.ndarray]:
    """One semi-implicit Euler step; returns the new state and per-foot ``(f_n, f_t)``.

    Touchdowns (a foot entering contact) append a ContactRecord with the
    foot's world position.
    """
    contact = contact or ContactParams()
    new = state.copy()
    fc = np.zeros((2, 2))
    ok = kernel.physics_step(new.q, new.qd, np.asarray(torques, dtype=np.float64),
                             float(external_force), model.as_array(), contact.as_array(),
                             *terrain.arrays(), new.anchor, new.contact, float(dt),
                             np.zeros((7, 7)), np.zeros(7), np.zeros(7), np.zeros((2, 7)),
                             np.zeros(2), fc)
    if not ok:
        raise NumericalDivergence("dynamics produced a non-finite or singular state")
    new.t = state.t + dt
    feet = kernel.foot_positions(new.q, model.as_array())
    records = list(state.contacts)
    for leg in (LEFT, RIGHT):
        if new.contact[leg] and not state.contact[leg]:
            records.append(ContactRecord((float(feet[leg, 0]), float(feet[leg, 1])), leg, new.t))
    new.contacts = tuple(records[-2:])
    return new, fc


def com_height_above_ground(state: SimState, model: RobotModel, terrain: Terrain) -> float:
    cx, cz, _, _ = kernel.com_state(state.q, state.qd, model.as_array())
    return cz - terrain.height(cx)


def compute_reward(state: SimState, prev_state: SimState, weights: RewardWeights,
                   model: RobotModel, terrain: Terrain) -> float:
    """Sum of Gaussian kernels on attitude, height and speed errors plus a progress term.

    Roll and yaw are identically zero for the planar robot.
    """
    P = model.as_array()
    cx, cz, vx, _ = kernel.com_state(state.q, state.qd, P)
    px, _, _, _ = kernel.com_state(prev_state.q, prev_state.qd, P)
    w1, w2, w3, w4, w5 = weights.w
    g = lambda w, x: math.exp(-w * x * x)
    roll = yaw = 0.0
    h = cz - terrain.height(cx)
    return (g(w1, roll) + g(w2, state.q[2]) + g(w3, yaw) + g(w4, h - weights.com_height)
            + g(w5, vx - weights.nominal_velocity) + weights.displacement * (cx - px))


def check_termination(state: SimState, terrain: Terrain, config: EnvConfig,
                      steps: int = 0, episode_length: int | None = None) -> str:
    if not (np.all(np.isfinite(state.q)) and np.all(np.isfinite(state.qd))) \
            or np.max(np.abs(state.qd)) > config.max_velocity:
        return "diverged"
    if state.q[1] - terrain.height(state.q[0]) < config.height_threshold:
        return "fell_low"
    if abs(state.q[2]) > config.pitch_threshold:
        return "toppled"
    n = config.episode_length if episode_length is None else episode_length
    if steps >= n:
        return "time_up"
    return "alive"


def rollout(policy: AffinePolicy, terrain: Terrain, perturbations: PerturbationSchedule | None = None,
            seed: int | None = None, episode_length: int | None = None, *,
            model: RobotModel | None = None, gait: GaitConfig | None = None,
            config: EnvConfig | None = None, log: bool = False,
            start: SimState | None = None) -> EpisodeResult:
    """Run one deterministic episode of ``policy`` on ``terrain``."""
    model = model or RobotModel()
    gait = gait or GaitConfig()
    config = config or EnvConfig()
    n = config.episode_length if episode_length is None else int(episode_length)
    state = (start.copy() if start is not None
             else initial_state(terrain, seed, model=model, gait=gait, config=config))
    pert = (perturbations or PerturbationSchedule()).as_array()
    P, G, R, K, C, W, T = _sim_arrays(model, gait, config)
    log_arr = np.zeros((n if log else 0, len(LOG_COLUMNS)))
    q, qd = state.q.copy(), state.qd.copy()
    total, steps, dist, reason, alpha, phase, stats = kernel.rollout_kernel(
        q, qd, float(state.phase), P, G, R, K, C, *terrain.arrays(),
        *_policy_arrays(policy), W, T, pert, config.dt, config.substeps, n,
        config.touchdown_airtime, log_arr)
    final = SimState(q, qd, phase=phase, t=state.t + steps * config.control_dt)
    termination = TERMINATION[reason]
    if not math.isfinite(dist):
        dist = float(log_arr[steps - 2, 7]) if log and steps > 1 else 0.0
    return EpisodeResult(
        total_return=float(total), steps=int(steps), distance=float(dist),
        termination=termination, final_state=final,
        log=log_arr[:steps] if log else None,
        stats={"friction_violations": int(stats[0]), "min_foot_clearance": float(stats[1]),
               "max_penetration": float(stats[2]), "max_friction_ratio": float(stats[3]),
               "min_normal_force": float(stats[4]), "touchdowns": int(stats[5]),
               "alpha_estimate": float(alpha)})
