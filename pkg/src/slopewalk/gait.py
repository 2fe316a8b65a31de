"""Phase-indexed semi-elliptical foot references and their action-driven transform."""

from __future__ import annotations

import math
from dataclasses import dataclass

from numba import njit

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class GaitConfig:
    period: float = 0.8
    hip_height: float = 0.7
    swing_height: float = 0.1
    phase_offset: float = 0.5

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError("period must be positive")
        if not 0 < self.swing_height < self.hip_height:
            raise ValueError("need 0 < swing_height < hip_height")
        if not 0 <= self.phase_offset < 1:
            raise ValueError("phase_offset must lie in [0, 1)")


@dataclass(frozen=True)
class GaitAction:
    """Per-leg ellipse parameters: step length, steering angle and x/y/z shifts."""

    step_length: float = 0.0
    steering: float = 0.0
    shift_x: float = 0.0
    shift_y: float = 0.0
    shift_z: float = 0.0


@dataclass(frozen=True)
class FootTarget:
    x: float
    y: float
    z: float


@njit(cache=True)
def wrap_phase(zeta):
    z = zeta % 1.0
    # float modulo can round up to exactly 1.0 for tiny negative inputs
    return 0.0 if z >= 1.0 else z


@njit(cache=True)
def ellipse_point(zeta, step_length, hip_height, swing_height):
    arg = TWO_PI * (1.0 - zeta)
    x = 0.5 * step_length * math.cos(arg)
    if zeta < 0.5:
        z = -hip_height
    else:
        z = -hip_height + swing_height * math.sin(arg)
    return x, z


def phase_advance(zeta: float, dt: float, config: GaitConfig) -> float:
    if dt < 0:
        raise ValueError("dt must be non-negative")
    return wrap_phase(zeta + dt / config.period)


def leg_phases(zeta: float, config: GaitConfig) -> tuple[float, float]:
    """(left, right) phases; the right leg trails by the configured offset."""
    return zeta, wrap_phase(zeta + config.phase_offset)


def reference_foot_point(zeta: float, step_length: float, config: GaitConfig) -> tuple[float, float, float]:
    """Untransformed ellipse point ``(x, y, z)`` in the hip-centred leg frame.

    The first half of the cycle is stance (flat at ``-hip_height``), the
    second half is the swing arc.
    """
    x, z = ellipse_point(zeta, step_length, config.hip_height, config.swing_height)
    return x, 0.0, z


def transform_foot_point(p: tuple[float, float, float], action: GaitAction) -> FootTarget:
    x, _, z = p
    return FootTarget(
        x=action.shift_x + x * math.cos(action.steering),
        y=action.shift_y + x * math.sin(action.steering),
        z=action.shift_z + z,
    )
