"""Piecewise-linear slope tracks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernel import terrain_query


@dataclass(frozen=True, eq=False)
class Terrain:
    """Height profile made of straight segments.

    Segment ``i`` starts at ``breaks[i]`` with slope angle ``slopes[i]`` (rad)
    and runs to the next breakpoint; the last one extends forever.  Everything
    left of the first breakpoint is flat at ``base_height``.
    """

    breaks: np.ndarray
    slopes: np.ndarray
    base_height: float = 0.0

    def __post_init__(self):
        xb = np.asarray(self.breaks, dtype=np.float64).reshape(-1)
        sb = np.asarray(self.slopes, dtype=np.float64).reshape(-1)
        if xb.shape != sb.shape:
            raise ValueError("breaks and slopes must have equal length")
        if np.any(np.diff(xb) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if np.any(np.abs(sb) >= math.pi / 2):
            raise ValueError("slopes must lie in (-90, 90) degrees")
        if xb.size == 0:
            xb, sb = np.array([0.0]), np.array([0.0])
        hb = np.empty_like(xb)
        hb[0] = self.base_height
        for i in range(1, xb.size):
            hb[i] = hb[i - 1] + math.tan(sb[i - 1]) * (xb[i] - xb[i - 1])
        for a in (xb, sb, hb):
            a.setflags(write=False)
        object.__setattr__(self, "breaks", xb)
        object.__setattr__(self, "slopes", sb)
        object.__setattr__(self, "_heights", hb)

    @property
    def break_heights(self) -> np.ndarray:
        return self._heights

    def height(self, x: float) -> float:
        return terrain_query(float(x), self.breaks, self._heights, self.slopes)[0]

    def slope(self, x: float) -> float:
        return terrain_query(float(x), self.breaks, self._heights, self.slopes)[1]

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.breaks, self._heights, self.slopes

    @property
    def end_x(self) -> float:
        """Start of the final segment (end of the last feature)."""
        return float(self.breaks[-1])

    @classmethod
    def flat(cls) -> "Terrain":
        return cls(np.array([0.0]), np.array([0.0]))

    @classmethod
    def from_segments(cls, segments, start: float = 0.0) -> "Terrain":
        """``segments`` is a sequence of ``(slope_rad, horizontal_length_m)``."""
        xs, ss = [], []
        x = start
        for slope, length in segments:
            if length <= 0:
                raise ValueError("segment lengths must be positive")
            xs.append(x)
            ss.append(slope)
            x += length
        xs.append(x)
        ss.append(0.0)
        return cls(np.array(xs), np.array(ss))


def build_track(incline: float, ramp_length: float, plateau_length: float,
                flat_length: float = 0.5) -> Terrain:
    """Flat start, incline ramp, plateau, decline ramp, flat end.

    ``incline`` in rad; lengths are horizontal extents in metres.  The flat
    start runs from x=0 to ``flat_length``.
    """
    if min(ramp_length, plateau_length, flat_length) <= 0:
        raise ValueError("track lengths must be positive")
    return Terrain.from_segments(
        [(incline, ramp_length), (0.0, plateau_length), (-incline, ramp_length)],
        start=flat_length)


def parse_track(spec: str) -> Terrain:
    """Parse a track string such as ``"flat:0.5m;ramp:7deg,1m;plateau:1m;ramp:-7deg,1m"``.

    Segments: ``flat:<L>m`` / ``plateau:<L>m`` (level) and ``ramp:<A>deg,<L>m``
    (signed slope).  A bare angle like ``"7deg"`` or ``"7"`` expands to the
    default incline-plateau-decline track at that angle; ``"flat"`` is level
    ground everywhere.
    """
    spec = spec.strip()
    if spec in ("", "flat"):
        return Terrain.flat()
    if ":" not in spec:
        return build_track(math.radians(_number(spec, "deg")), 1.0, 1.0)
    segments = []
    for part in spec.split(";"):
        if not part.strip():
            continue
        kind, _, args = part.partition(":")
        kind = kind.strip().lower()
        vals = [a.strip() for a in args.split(",")]
        if kind in ("flat", "plateau") and len(vals) == 1:
            segments.append((0.0, _number(vals[0], "m")))
        elif kind == "ramp" and len(vals) == 2:
            segments.append((math.radians(_number(vals[0], "deg")), _number(vals[1], "m")))
        else:
            raise ValueError(f"bad track segment {part!r}")
    return Terrain.from_segments(segments)


def _number(text: str, unit: str) -> float:
    text = text.strip()
    if text.endswith(unit):
        text = text[: -len(unit)]
    try:
        return float(text)
    except ValueError:
        raise ValueError(f"expected a number in {unit}, got {text!r}") from None
