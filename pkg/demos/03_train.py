"""
Improving the seed with random search
=====================================

Augmented random search perturbs the 3x3 gain matrix along random directions,
rolls out each +/- pair on the same randomly drawn track and start, and steps
along the directions whose better rollout scored highest.  Only the matrix is
learned; the offsets that encode step length and setpoints stay fixed.

This demo runs a short budget.  ``configs/slopes.yaml`` holds the full
experiment; run it with ``slopewalk train --config configs/slopes.yaml``.
"""

import sys
from dataclasses import replace

from slopewalk.ars import WalkingObjective, train
from slopewalk.config import default_config
from slopewalk.policy import build_seed_policy

iterations = int(sys.argv[1]) if len(sys.argv) > 1 else 20
cfg = default_config()
seed = build_seed_policy(cfg.policy.gains, cfg.policy.mode, cfg.policy.clip_bounds)
objective = WalkingObjective(cfg.ars.inclines, env=cfg.env, model=cfg.model, gait=cfg.gait,
                             episode_length=cfg.ars.episode_length)

print(f"seed evaluation return {objective.evaluate(seed):.0f}")
best, history = train(seed, replace(cfg.ars, iterations=iterations), objective,
                      callback=lambda r: print(f"  iter {r.iteration:3d}  mean {r.mean_return:8.0f}"
                                               f"  eval {r.eval_return:8.0f}"))
print(f"best evaluation return {objective.evaluate(best):.0f}")
print("learned change to the gain matrix:")
print((best.matrix - seed.matrix).round(4))
