"""
Walking with the hand-tuned seed policy
=======================================

The seed policy is a sparse affine map from torso pitch, pitch rate and the
estimated ground slope to step length and the x/z shifts of the foot curve.
With the default gains it walks on flat ground from the canonical start.
The same gains are not enough for a 7 degree incline, which is what training
is for.
"""

import math

import numpy as np

from slopewalk.env import LOG_COLUMNS, Terrain, build_track, rollout
from slopewalk.policy import SeedGains, build_seed_policy

policy = build_seed_policy(SeedGains())
print("matrix (rows: step_length, shift_x, shift_z; cols: pitch, pitch_rate, slope)")
print(np.array2string(policy.matrix, precision=4))
print("offset", np.array2string(policy.offset, precision=4))

flat = rollout(policy, Terrain.flat(), log=True)
print(f"\nflat: {flat.distance:.2f} m in {flat.steps / 1000:.1f} s, {flat.termination}, "
      f"{flat.stats['touchdowns']} touchdowns")

# Every half second: torso position, pitch and commanded step length.
cols = [LOG_COLUMNS.index(c) for c in ("t", "torso_x", "pitch_deg", "l_cmd")]
for row in flat.log[::500, cols]:
    print("  t {:4.1f}  x {:5.2f}  pitch {:5.2f} deg  l {:+.3f}".format(*row))

track = build_track(math.radians(7), 1.0, 1.0)
hill = rollout(policy, track, log=True)
alpha = hill.log[:, LOG_COLUMNS.index("alpha_est_deg")]
print(f"\n7 deg track: {hill.distance:.2f} m, {hill.termination}; "
      f"slope estimate reached {alpha.max():.2f} deg")
