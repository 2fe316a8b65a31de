"""Augmented Random Search over the policy matrix.

The optimizer only sees an *objective*: something that draws per-iteration
conditions from an rng, scores a policy under given conditions and returns a
deterministic evaluation score.  ``WalkingObjective`` wraps the biped
environment; tests plug in cheap synthetic objectives.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .env import EnvConfig, Terrain, build_track, rollout
from .gait import GaitConfig
from .policy import AffinePolicy, save_policy
from .robot_model import RobotModel

TELEMETRY_COLUMNS = ("iteration", "mean_return", "max_return", "eval_return", "sigma_R")


@dataclass(frozen=True)
class ArsConfig:
    step_size: float = 0.03
    noise: float = 0.04
    directions: int = 16
    top_directions: int = 8
    iterations: int = 1000
    episode_length: int = 10_000
    rng_seed: int = 0
    inclines: tuple[float, ...] = (0.0, math.radians(7.0))
    # early stop when the best eval return improves by less than this fraction
    plateau_tol: float = 1e-3
    plateau_window: int = 100
    checkpoint_every: int = 50
    workers: int = 1

    def __post_init__(self):
        if not 0 < self.top_directions <= self.directions:
            raise ValueError("need 0 < top_directions <= directions")
        if self.step_size <= 0 or self.noise <= 0:
            raise ValueError("step_size and noise must be positive")
        if self.iterations < 0 or self.episode_length < 1:
            raise ValueError("iterations must be >= 0 and episode_length >= 1")
        if not self.inclines:
            raise ValueError("need at least one training incline")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    mean_return: float
    max_return: float
    min_return: float
    eval_return: float
    sigma_r: float

    def row(self) -> list:
        return [self.iteration, self.mean_return, self.max_return, self.eval_return, self.sigma_r]


def sample_directions(n: int, shape, rng: np.random.Generator) -> np.ndarray:
    """``n`` i.i.d. standard-normal perturbations shaped like the policy matrix."""
    if n < 1:
        raise ValueError("need at least one direction")
    return rng.standard_normal((n, *tuple(shape)))


def select_top(r_plus, r_minus, b: int) -> np.ndarray:
    """Indices of the ``b`` directions with the largest max(r+, r-).

    Ties keep the lower index so the choice is independent of sort internals.
    """
    best = np.maximum(np.asarray(r_plus, float), np.asarray(r_minus, float))
    return np.argsort(-best, kind="stable")[:b]


def ars_update(matrix, r_plus, r_minus, deltas, step_size: float, top: int):
    """One ARS step.  Returns ``(new_matrix, sigma_R)``.

    sigma_R is the std of the 2b selected rewards; a degenerate batch
    (sigma_R < 1e-8) leaves the matrix unchanged.
    """
    r_plus = np.asarray(r_plus, dtype=np.float64)
    r_minus = np.asarray(r_minus, dtype=np.float64)
    deltas = np.asarray(deltas, dtype=np.float64)
    idx = select_top(r_plus, r_minus, top)
    sigma = float(np.std(np.concatenate([r_plus[idx], r_minus[idx]])))
    m = np.asarray(matrix, dtype=np.float64)
    if sigma < 1e-8:
        return m.copy(), sigma
    step = np.zeros_like(m)
    for i in idx:
        step += (r_plus[i] - r_minus[i]) * deltas[i]
    return m + step_size / (top * sigma) * step, sigma


@dataclass
class WalkingObjective:
    """Biped rollouts on incline-plateau-decline tracks.

    Conditions are ``(incline, start_seed)``; evaluation averages unperturbed
    rollouts over every training incline with a fixed start seed.
    """

    inclines: Sequence[float]
    env: EnvConfig = field(default_factory=EnvConfig)
    model: RobotModel = field(default_factory=RobotModel)
    gait: GaitConfig = field(default_factory=GaitConfig)
    episode_length: int | None = None
    ramp_length: float = 1.0
    plateau_length: float = 1.0
    eval_seed: int = 0

    def track(self, incline: float) -> Terrain:
        return build_track(incline, self.ramp_length, self.plateau_length)

    def sample(self, rng: np.random.Generator):
        incline = float(self.inclines[int(rng.integers(len(self.inclines)))])
        return incline, int(rng.integers(2**31 - 1))

    def __call__(self, policy: AffinePolicy, cond) -> float:
        incline, seed = cond
        res = rollout(policy, self.track(incline), seed=seed, episode_length=self.episode_length,
                      model=self.model, gait=self.gait, config=self.env)
        return res.total_return

    def evaluate(self, policy: AffinePolicy) -> float:
        return float(np.mean([self(policy, (inc, self.eval_seed)) for inc in self.inclines]))


def _score(args):
    objective, policy, cond = args
    return objective(policy, cond)


def train(seed_policy: AffinePolicy, config: ArsConfig, objective=None, *,
          env_config: EnvConfig | None = None, model: RobotModel | None = None,
          gait: GaitConfig | None = None, telemetry_path=None, checkpoint_dir=None,
          callback: Callable[[IterationRecord], None] | None = None):
    """Run ARS from ``seed_policy``.  Returns ``(best_policy, history)``.

    Every iteration draws one set of conditions and scores all 2N perturbed
    policies on it, so antithetic pairs see identical terrain and start.  Only
    the matrix moves; the offset and clip bounds are carried along untouched.
    The returned policy is the one with the highest evaluation return seen,
    the seed included.
    """
    if objective is None:
        objective = WalkingObjective(config.inclines, env=env_config or EnvConfig(),
                                     model=model or RobotModel(), gait=gait or GaitConfig(),
                                     episode_length=config.episode_length)
    rng = np.random.default_rng(config.rng_seed)
    policy = seed_policy
    best, best_eval = seed_policy, objective.evaluate(seed_policy)
    history: list[IterationRecord] = []
    plateau_ref = (0, best_eval)
    writer = None
    if telemetry_path is not None:
        fh = open(telemetry_path, "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(TELEMETRY_COLUMNS)
    pool = ProcessPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        for it in range(config.iterations):
            deltas = sample_directions(config.directions, policy.matrix.shape, rng)
            cond = objective.sample(rng)
            jobs = []
            for d in deltas:
                jobs.append((objective, policy.with_matrix(policy.matrix + config.noise * d), cond))
                jobs.append((objective, policy.with_matrix(policy.matrix - config.noise * d), cond))
            # map keeps submission order, so the result is schedule-independent
            scores = np.array(list(pool.map(_score, jobs) if pool else map(_score, jobs)))
            r_plus, r_minus = scores[0::2], scores[1::2]
            new_m, sigma = ars_update(policy.matrix, r_plus, r_minus, deltas,
                                      config.step_size, config.top_directions)
            policy = policy.with_matrix(new_m)
            ev = objective.evaluate(policy)
            rec = IterationRecord(it, float(scores.mean()), float(scores.max()),
                                  float(scores.min()), float(ev), sigma)
            history.append(rec)
            if writer is not None:
                writer.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in rec.row()])
            if callback is not None:
                callback(rec)
            if ev > best_eval:
                best, best_eval = policy, ev
            if checkpoint_dir is not None and (it + 1) % config.checkpoint_every == 0:
                save_policy(policy, Path(checkpoint_dir) / f"checkpoint_{it + 1:05d}.json")
            if it + 1 - plateau_ref[0] >= config.plateau_window:
                ref = plateau_ref[1]
                if best_eval - ref <= config.plateau_tol * abs(ref):
                    break
                plateau_ref = (it + 1, best_eval)
    finally:
        if pool is not None:
            pool.shutdown()
        if writer is not None:
            fh.close()
    return best, history
