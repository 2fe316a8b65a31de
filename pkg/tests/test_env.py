import math

import numpy as np
import pytest

from slopewalk.env import (
    EnvConfig,
    PerturbationSchedule,
    RewardWeights,
    SimState,
    Terrain,
    build_track,
    check_termination,
    compute_reward,
    dynamics_step,
    initial_state,
    parse_track,
    pd_torques,
    rollout,
)
from slopewalk.env import kernel
from slopewalk.policy import AffinePolicy
from slopewalk.robot_model import LEFT, RIGHT, RobotModel

MODEL = RobotModel()


def link_coms(q, m=MODEL):
    """(mass, inertia, x, z, angle) of each body, written out from the geometry."""
    x, z, th = q[0], q[1], q[2]
    out = [(m.torso_mass, m.link_inertias[0], x + m.com_offsets[0] * math.sin(th),
            z + m.com_offsets[0] * math.cos(th), th)]
    for leg in (0, 1):
        qh, qk = q[3 + 2 * leg], q[4 + 2 * leg]
        a1, a2 = qh - th, qh + qk - th
        kx, kz = x + m.thigh_length * math.sin(a1), z - m.thigh_length * math.cos(a1)
        out.append((m.thigh_mass, m.link_inertias[1], x + m.com_offsets[1] * math.sin(a1),
                    z - m.com_offsets[1] * math.cos(a1), a1))
        out.append((m.shin_mass, m.link_inertias[2], kx + m.com_offsets[2] * math.sin(a2),
                    kz - m.com_offsets[2] * math.cos(a2), a2))
    return out


def energy_oracle(q, qd, m=MODEL, h=1e-6):
    base = link_coms(q, m)
    dq = [np.array(link_coms(q + h * qd, m)) - np.array(link_coms(q - h * qd, m))]
    vel = dq[0] / (2 * h)
    e = 0.0
    for (mass, inertia, _, cz, _), v in zip(base, vel):
        e += 0.5 * mass * (v[2] ** 2 + v[3] ** 2) + 0.5 * inertia * v[4] ** 2 + mass * m.gravity * cz
    return e


def momentum_x(q, qd, m=MODEL, h=1e-6):
    vel = (np.array(link_coms(q + h * qd, m)) - np.array(link_coms(q - h * qd, m))) / (2 * h)
    return sum(b[0] * v[2] for b, v in zip(link_coms(q, m), vel))


def airborne_state(height=3.0, seed=0):
    rng = np.random.default_rng(seed)
    q = np.array([0.0, height, 0.1, 0.3, 0.6, -0.2, 0.4])
    qd = rng.normal(scale=1.0, size=7)
    qd[1] = 4.0
    return SimState(q, qd)


def test_pd_torques_examples():
    from dataclasses import replace
    soft = replace(MODEL, pd_gains=(300.0, 8.0))
    st = initial_state(Terrain.flat())
    st.qd[:] = 0.0
    tau = pd_torques(st, st.q[3:] + np.array([0.1, 0, 0, 0]), soft)
    assert tau[0] == pytest.approx(30.0)
    assert np.allclose(tau[1:], 0.0)
    tau = pd_torques(st, st.q[3:] + np.array([1.0, -1.0, 0, 0]), soft)
    assert tau[0] == 150.0 and tau[1] == -150.0
    st.qd[3] = 2.0
    assert pd_torques(st, st.q[3:], soft)[0] == pytest.approx(-16.0)


def test_energy_oracle_agrees_with_kernel():
    s = airborne_state()
    assert kernel.mechanical_energy(s.q, s.qd, MODEL.as_array()) == pytest.approx(
        energy_oracle(s.q, s.qd), rel=1e-8)


def test_passive_airborne_energy_drift():
    flat = Terrain.flat()
    s = airborne_state()
    e0 = energy_oracle(s.q, s.qd)
    dt, n = 0.0005, 2000
    worst = 0.0
    for _ in range(n):
        s, _ = dynamics_step(s, np.zeros(4), 0.0, dt, model=MODEL, terrain=flat)
        worst = max(worst, abs(energy_oracle(s.q, s.qd) - e0))
    assert not s.contact.any()
    assert worst / abs(e0) / (n * dt) < 0.005


def test_zero_gravity_kinetic_energy_drift():
    model = RobotModel(gravity=0.0)
    s = airborne_state()
    e0 = energy_oracle(s.q, s.qd, model)
    for _ in range(2000):
        s, _ = dynamics_step(s, np.zeros(4), 0.0, 0.0005, model=model, terrain=Terrain.flat())
    assert abs(energy_oracle(s.q, s.qd, model) - e0) / e0 < 0.005


def test_impulse_momentum():
    s = airborne_state(height=5.0, seed=1)
    p0 = momentum_x(s.q, s.qd)
    force, dt, n = 40.0, 0.0005, 200
    for _ in range(n):
        s, _ = dynamics_step(s, np.zeros(4), force, dt, model=MODEL, terrain=Terrain.flat())
    assert momentum_x(s.q, s.qd) - p0 == pytest.approx(force * n * dt, rel=0.01)


def test_standing_settles_without_deep_penetration():
    # a wide stance keeps the whole-body COM well inside the two contact points
    flat = Terrain.flat()
    s = initial_state(flat, config=EnvConfig(initial_step_length=0.4))
    targets = s.q[3:].copy()
    P = MODEL.as_array()
    kp, kd = MODEL.pd_gains
    worst = 0.0
    for _ in range(6000):
        tau = np.clip(kp * (targets - s.q[3:]) - kd * s.qd[3:], -150, 150)
        s, _ = dynamics_step(s, tau, 0.0, 0.0005, model=MODEL, terrain=flat)
        worst = max(worst, -kernel.foot_positions(s.q, P)[:, 1].min())
    assert worst < 0.002
    assert s.contact.all() and abs(s.q[2]) < 0.1


def test_canonical_stand_touches_ground():
    s = initial_state(Terrain.flat())
    feet = kernel.foot_positions(s.q, MODEL.as_array())
    assert np.all(np.abs(feet[:, 1]) < 1e-3)
    assert s.q[2] == 0.0 and np.all(s.qd == 0.0)


def test_placements_on_steep_track():
    track = build_track(math.radians(11), 1.0, 1.0)
    cfg = EnvConfig(start_x_range=(0.0, 3.0))
    for seed in range(100):
        s = initial_state(track, seed, config=cfg)
        feet = kernel.foot_positions(s.q, MODEL.as_array())
        for x, z in feet:
            assert abs(z - track.height(x)) < 0.002
        assert abs(s.q[2]) <= math.radians(2.0)


def test_initial_state_deterministic():
    a = initial_state(Terrain.flat(), 5)
    b = initial_state(Terrain.flat(), 5)
    assert np.array_equal(a.q, b.q)


def test_terrain_profile():
    t = build_track(math.radians(7), 1.0, 1.0)
    rise = math.tan(math.radians(7))
    assert t.height(0.2) == 0.0
    assert t.height(1.0) == pytest.approx(0.5 * rise)
    assert t.height(2.0) == pytest.approx(rise)
    assert t.height(3.0) == pytest.approx(0.5 * rise)
    assert t.height(5.0) == pytest.approx(0.0, abs=1e-12)
    assert t.end_x == 3.5
    assert t.slope(1.0) == pytest.approx(math.radians(7))


def test_parse_track():
    t = parse_track("ramp:7deg,3m;plateau:2m")
    assert t.height(3.0) == pytest.approx(3 * math.tan(math.radians(7)))
    assert t.height(4.5) == pytest.approx(3 * math.tan(math.radians(7)))
    assert parse_track("flat").height(12.0) == 0.0
    with pytest.raises(ValueError):
        parse_track("ramp:7deg")


def test_reward_matches_formula():
    flat = Terrain.flat()
    w = RewardWeights()
    s0 = initial_state(flat)
    s1 = s0.copy()
    s1.q[0] += 0.01
    s1.q[2] = 0.05
    s1.qd[0] = 0.3
    P = MODEL.as_array()
    cx0 = kernel.com_state(s0.q, s0.qd, P)[0]
    cx, cz, vx, _ = kernel.com_state(s1.q, s1.qd, P)
    want = (2.0 + math.exp(-w.w[1] * 0.05 ** 2) + math.exp(-w.w[3] * (cz - w.com_height) ** 2)
            + math.exp(-w.w[4] * (vx - w.nominal_velocity) ** 2) + w.displacement * (cx - cx0))
    assert compute_reward(s1, s0, w, MODEL, flat) == pytest.approx(want, abs=1e-12)


def test_termination_reasons():
    cfg = EnvConfig()
    flat = Terrain.flat()
    s = initial_state(flat)
    assert check_termination(s, flat, cfg, 0) == "alive"
    assert check_termination(s, flat, cfg, cfg.episode_length) == "time_up"
    low = s.copy(); low.q[1] = 0.3
    assert check_termination(low, flat, cfg) == "fell_low"
    tip = s.copy(); tip.q[2] = math.radians(50)
    assert check_termination(tip, flat, cfg) == "toppled"
    bad = s.copy(); bad.qd[0] = float("nan")
    assert check_termination(bad, flat, cfg) == "diverged"


def test_touchdown_records_contact():
    flat = Terrain.flat()
    s = initial_state(flat)
    s.q[1] += 0.05
    s.contact[:] = False
    for _ in range(400):
        s, fc = dynamics_step(s, np.zeros(4), 0.0, 0.0005, model=MODEL, terrain=flat)
    assert {c.leg_id for c in s.contacts} == {LEFT, RIGHT}
    assert all(abs(c.position[1]) < 0.01 for c in s.contacts)


def test_rollout_deterministic_and_zero_policy_falls():
    pol = AffinePolicy.zeros()
    a = rollout(pol, Terrain.flat(), seed=3, log=True)
    b = rollout(pol, Terrain.flat(), seed=3, log=True)
    assert a.total_return == b.total_return and np.array_equal(a.log, b.log)
    assert math.isfinite(a.total_return)
    assert a.termination in ("fell_low", "toppled", "time_up")


def test_perturbation_schedule():
    s = PerturbationSchedule.periodic(-5.0, 0.25, 1.0, 1.0, 3.5)
    assert len(s.windows) == 3
    assert s.force_at(1.1) == -5.0 and s.force_at(1.3) == 0.0
    with pytest.raises(ValueError):
        PerturbationSchedule(((0.0, 1.0, 1.0), (0.5, 1.0, 1.0)))


def test_log_columns(tmp_path):
    res = rollout(AffinePolicy.zeros(), Terrain.flat(), episode_length=50, log=True)
    res.write_csv(tmp_path / "log.csv")
    head = (tmp_path / "log.csv").read_text().splitlines()[0]
    assert head == ("t,torso_x,torso_z,pitch_deg,pitch_rate,phase,reward,dist,contact_L,"
                    "contact_R,l_cmd,xshift_cmd,zshift_cmd,alpha_est_deg,force_ext")
    assert res.log.shape == (res.steps, 15)
