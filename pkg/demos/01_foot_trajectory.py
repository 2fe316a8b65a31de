"""
Foot trajectories and leg kinematics
====================================

Each leg tracks a semi-ellipse in its hip frame: a flat stance segment at
depth ``-h_d`` and a sinusoidal swing arc.  The policy never outputs joint
angles; it reshapes this curve, and inverse kinematics turns curve points
into hip and knee targets.
"""

import numpy as np

from slopewalk.gait import GaitAction, GaitConfig, reference_foot_point, transform_foot_point
from slopewalk.robot_model import RobotModel, forward_kinematics, inverse_kinematics

gait = GaitConfig()
model = RobotModel()

# One cycle of the untransformed curve for a 0.3 m step.
for zeta in np.linspace(0.0, 1.0, 9)[:-1]:
    x, _, z = reference_foot_point(zeta, 0.3, gait)
    print(f"zeta {zeta:5.3f}  x {x:+.3f}  z {z:+.3f}  {'stance' if zeta < 0.5 else 'swing'}")

# Shifts translate the whole curve in the hip frame; a negative z shift
# stretches the legs.
p = reference_foot_point(0.0, 0.3, gait)
t = transform_foot_point(p, GaitAction(step_length=0.3, shift_x=0.05, shift_z=-0.02))
print(f"\nstance start {p[0]:+.3f}, {p[2]:+.3f} -> shifted {t.x:+.3f}, {t.z:+.3f}")

# Knee-backward IK and its round trip through forward kinematics.
hip, knee = inverse_kinematics(t.x, t.z, model)
fx, fz = forward_kinematics(hip, knee, model)
print(f"IK hip {np.degrees(hip):+.2f} deg, knee {np.degrees(knee):+.2f} deg; "
      f"FK error {np.hypot(fx - t.x, fz - t.z):.1e} m")
