"""
Recovering from a push
======================

A horizontal force on the torso tips the walker.  The report compares the
pushed run with an unpushed run from the same start: the peak pitch
deviation, and how long until pitch stays within 2 degrees of the unpushed
trace for a full second.

Pass a policy file (for example one written by ``slopewalk train``) to test
a trained walker; without one the seed policy is used.
"""

import sys

from slopewalk.cli import push_trial
from slopewalk.config import default_config
from slopewalk.env import PerturbationSchedule
from slopewalk.policy import build_seed_policy, load_policy

cfg = default_config()
if len(sys.argv) > 1:
    policy = load_policy(sys.argv[1])
else:
    policy = build_seed_policy(cfg.policy.gains, cfg.policy.mode, cfg.policy.clip_bounds)

for force in (5.0, 10.0, -10.0):
    for t_start in (3.0, 4.0, 5.0):
        trial = push_trial(policy, cfg, PerturbationSchedule.impulse(force, 0.1, t_start), t_start)
        rec = "no recovery" if trial.recovery_s is None else f"recovered in {trial.recovery_s:.2f} s"
        print(f"{force:+5.1f} N at t={t_start:.0f} s: peak deviation {trial.peak_deviation_deg:5.2f} deg, "
              f"{rec}, {trial.pushed.termination}")
