"""Planar five-link biped description, leg kinematics and contact-based slope estimation.

Conventions used across the package:

* World frame: x forward, z up.  Torso pitch ``theta`` is positive when the
  torso leans forward (its up-axis tilts toward +x).
* Leg frame: origin at the hip, axes fixed to the torso.  Hip angle is measured
  from the torso's downward axis, positive swinging the foot forward.  Knee
  angle is the relative flexion of the shin w.r.t. the thigh; the knee-backward
  branch has ``knee >= 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

LEFT, RIGHT = 0, 1


class OutOfReach(ValueError):
    """Foot target lies outside the leg's reachable annulus."""


@dataclass(frozen=True)
class RobotModel:
    torso_mass: float = 12.0
    thigh_mass: float = 6.8
    shin_mass: float = 3.2
    torso_length: float = 0.625
    thigh_length: float = 0.4
    shin_length: float = 0.4
    # about each link COM; None -> uniform rod m*l^2/12
    link_inertias: tuple[float, float, float] | None = None
    # COM distance from the proximal joint (hip for torso/thigh, knee for shin)
    com_offsets: tuple[float, float, float] | None = None
    # (lo, hi) in rad for hip and knee; same limits for both legs
    joint_limits: tuple[tuple[float, float], tuple[float, float]] = (
        (-math.radians(100.0), math.radians(100.0)),
        (0.0, math.radians(150.0)),
    )
    torque_limit: float = 150.0
    pd_gains: tuple[float, float] = (1000.0, 20.0)
    gravity: float = 9.81

    def __post_init__(self):
        if self.link_inertias is None:
            object.__setattr__(self, "link_inertias", (
                self.torso_mass * self.torso_length**2 / 12.0,
                self.thigh_mass * self.thigh_length**2 / 12.0,
                self.shin_mass * self.shin_length**2 / 12.0,
            ))
        if self.com_offsets is None:
            object.__setattr__(self, "com_offsets", (
                self.torso_length / 2, self.thigh_length / 2, self.shin_length / 2))
        positive = (self.torso_mass, self.thigh_mass, self.shin_mass, self.torso_length,
                    self.thigh_length, self.shin_length, *self.link_inertias)
        if min(positive) <= 0:
            raise ValueError("masses, lengths and inertias must be strictly positive")
        if self.joint_limits[1][0] < 0:
            raise ValueError("knee lower limit must be >= 0 (no hyperextension)")
        if self.torque_limit <= 0:
            raise ValueError("torque_limit must be positive")

    @property
    def total_mass(self) -> float:
        return self.torso_mass + 2 * (self.thigh_mass + self.shin_mass)

    @property
    def leg_reach(self) -> tuple[float, float]:
        return abs(self.thigh_length - self.shin_length), self.thigh_length + self.shin_length

    def as_array(self) -> np.ndarray:
        """Flat parameter vector consumed by the compiled dynamics kernel."""
        return np.array([
            self.torso_mass, self.thigh_mass, self.shin_mass,
            self.torso_length, self.thigh_length, self.shin_length,
            *self.com_offsets, *self.link_inertias, self.gravity,
        ], dtype=np.float64)


@dataclass(frozen=True)
class ContactRecord:
    position: tuple[float, float]
    leg_id: int
    time: float = 0.0


@njit(cache=True)
def fk_xz(hip, knee, l1, l2):
    x = l1 * math.sin(hip) + l2 * math.sin(hip + knee)
    z = -l1 * math.cos(hip) - l2 * math.cos(hip + knee)
    return x, z


@njit(cache=True)
def ik_xz(x, z, l1, l2):
    """Knee-backward IK; caller guarantees the target is reachable."""
    r2 = x * x + z * z
    c = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
    c = min(1.0, max(-1.0, c))
    knee = math.acos(c)
    hip = math.atan2(x, -z) - math.atan2(l2 * math.sin(knee), l1 + l2 * math.cos(knee))
    return hip, knee


@njit(cache=True)
def clip_to_reach(x, z, r_min, r_max):
    r = math.sqrt(x * x + z * z)
    if r > r_max:
        s = r_max / r
        return x * s, z * s
    if r < r_min:
        if r < 1e-12:
            return 0.0, -r_min
        s = r_min / r
        return x * s, z * s
    return x, z


def forward_kinematics(hip_angle: float, knee_angle: float, model: RobotModel) -> tuple[float, float]:
    """Foot position ``(x, z)`` in the hip-centred leg frame."""
    return fk_xz(float(hip_angle), float(knee_angle), model.thigh_length, model.shin_length)


def inverse_kinematics(x: float, z: float, model: RobotModel) -> tuple[float, float]:
    """Joint angles ``(hip, knee)`` reaching ``(x, z)`` on the knee-backward branch.

    Raises OutOfReach when the target is outside ``|l1-l2| <= r <= l1+l2``.
    """
    l1, l2 = model.thigh_length, model.shin_length
    r = math.hypot(x, z)
    r_min, r_max = model.leg_reach
    tol = 1e-12
    if not (r_min - tol <= r <= r_max + tol):
        raise OutOfReach(f"target ({x:.4f}, {z:.4f}) at r={r:.4f} outside [{r_min:.4f}, {r_max:.4f}]")
    return ik_xz(float(x), float(z), l1, l2)


MIN_CONTACT_SEPARATION = 0.01


@njit(cache=True)
def slope_between(x_prev, z_prev, x_curr, z_curr, previous):
    dx = x_curr - x_prev
    if abs(dx) < MIN_CONTACT_SEPARATION:
        return previous
    # surface pitch, independent of stepping direction
    return math.atan((z_curr - z_prev) / dx)


def estimate_terrain_pitch(prev: ContactRecord, curr: ContactRecord, previous: float = 0.0) -> float:
    """Support-plane pitch from the segment joining two successive foot contacts.

    For forward steps this is ``atan2(dz, dx)``.  Backward steps give the same
    surface pitch rather than an angle near pi.  When the contacts are less
    than 1 cm apart horizontally, ``previous`` is returned unchanged.
    """
    return slope_between(prev.position[0], prev.position[1],
                         curr.position[0], curr.position[1], previous)
