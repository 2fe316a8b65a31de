import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from slopewalk.gait import (
    GaitAction,
    GaitConfig,
    leg_phases,
    phase_advance,
    reference_foot_point,
    transform_foot_point,
)

CFG = GaitConfig(period=1.0, hip_height=0.7, swing_height=0.1)


@pytest.mark.parametrize("zeta,dt,period,expected", [
    (0.0, 0.0, 1.0, 0.0),
    (0.9, 0.2, 1.0, 0.1),
    (0.25, 0.5, 2.0, 0.5),
])
def test_phase_advance(zeta, dt, period, expected):
    assert phase_advance(zeta, dt, GaitConfig(period=period)) == pytest.approx(expected, abs=1e-15)


def test_phase_advance_rejects_negative_dt():
    with pytest.raises(ValueError):
        phase_advance(0.1, -0.01, CFG)


@pytest.mark.parametrize("kwargs", [{"period": 0.0}, {"swing_height": 0.8}, {"phase_offset": 1.0}])
def test_invalid_gait_config(kwargs):
    with pytest.raises(ValueError):
        GaitConfig(**kwargs)


def test_reference_point_examples():
    assert reference_foot_point(0.0, 0.3, CFG) == pytest.approx((0.15, 0.0, -0.7), abs=1e-15)
    assert reference_foot_point(0.75, 0.3, CFG) == pytest.approx((0.0, 0.0, -0.6), abs=1e-15)
    before = reference_foot_point(0.5 - 1e-12, 0.3, CFG)
    at = reference_foot_point(0.5, 0.3, CFG)
    assert before[2] == -0.7
    assert at[2] == pytest.approx(-0.7, abs=1e-15)


def test_leg_phases():
    assert leg_phases(0.2, CFG) == pytest.approx((0.2, 0.7))
    assert leg_phases(0.8, CFG) == pytest.approx((0.8, 0.3))
    hop = GaitConfig(phase_offset=0.0)
    assert leg_phases(0.37, hop) == (0.37, 0.37)


def test_transform_identity_and_steering():
    p = (0.15, 0.0, -0.7)
    t = transform_foot_point(p, GaitAction())
    assert (t.x, t.y, t.z) == (0.15, 0.0, -0.7)
    t = transform_foot_point(p, GaitAction(steering=math.pi / 2, shift_x=0.02))
    assert t.x == pytest.approx(0.02, abs=1e-15)
    assert t.y == pytest.approx(0.15, abs=1e-15)


def test_transform_matches_independent_formula():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        x, z = rng.uniform(-0.2, 0.2), rng.uniform(-0.8, -0.5)
        phi, sx, sy, sz = rng.uniform(-0.5, 0.5), *rng.uniform(-0.12, 0.12, 3)
        t = transform_foot_point((x, 0.0, z), GaitAction(0.0, phi, sx, sy, sz))
        assert (t.x, t.y, t.z) == (sx + x * math.cos(phi), sy + x * math.sin(phi), sz + z)


step = st.floats(-0.3, 0.4)
heights = st.tuples(st.floats(0.3, 0.8), st.floats(0.01, 0.25)).filter(lambda h: h[1] < h[0])


@given(step, heights)
def test_curve_closed_and_continuous(ell, h):
    cfg = GaitConfig(hip_height=h[0], swing_height=h[1])
    end = np.array(reference_foot_point(1.0 - 1e-13, ell, cfg))
    start = np.array(reference_foot_point(0.0, ell, cfg))
    assert np.linalg.norm(end - start) < 1e-9
    mid_l = np.array(reference_foot_point(0.5 - 1e-13, ell, cfg))
    mid_r = np.array(reference_foot_point(0.5, ell, cfg))
    assert np.linalg.norm(mid_l - mid_r) < 1e-9


@given(step, heights, st.floats(0.0, 0.4999))
def test_stance_is_flat(ell, h, zeta):
    cfg = GaitConfig(hip_height=h[0], swing_height=h[1])
    assert reference_foot_point(zeta, ell, cfg)[2] == -h[0]


@given(step, heights, st.floats(0.0, 0.9999), st.floats(-0.12, 0.12))
def test_swing_never_exceeds_apex(ell, h, zeta, sz):
    cfg = GaitConfig(hip_height=h[0], swing_height=h[1])
    z = transform_foot_point(reference_foot_point(zeta, ell, cfg), GaitAction(shift_z=sz)).z
    assert sz - h[0] - 1e-12 <= z <= sz - h[0] + h[1] + 1e-12


@given(step, st.floats(0.0, 0.9999))
def test_negative_step_mirrors(ell, zeta):
    assert reference_foot_point(zeta, -ell, CFG)[0] == -reference_foot_point(zeta, ell, CFG)[0]
