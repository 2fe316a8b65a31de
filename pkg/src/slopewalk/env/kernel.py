"""Compiled planar multibody dynamics and the per-episode control loop.

Generalized coordinates ``q = [x, z, pitch, hip_L, knee_L, hip_R, knee_R]`` where
``(x, z)`` is the hip joint in the world frame.  Equations of motion are built by
projecting each link's Newton-Euler terms through its Jacobian (Kane's form):

    sum_i m_i J_i^T (J_i qdd + Jdot_i qd) + I_i Jw_i^T Jw_i qdd = Q

Integration is semi-implicit Euler.
"""

import math

import numpy as np
from numba import njit

from ..gait import ellipse_point, wrap_phase
from ..robot_model import clip_to_reach, fk_xz, ik_xz, slope_between

NQ = 7
N_LOG = 15

# model parameter vector layout (RobotModel.as_array)
P_MT, P_MTH, P_MSH, P_LT, P_L1, P_L2, P_CT, P_CTH, P_CSH, P_IT, P_ITH, P_ISH, P_G = range(13)

# termination codes
ALIVE, FELL_LOW, TOPPLED, DIVERGED, TIME_UP = 0, 1, 2, 3, 4


@njit(cache=True)
def terrain_query(x, xb, hb, sb):
    """Height and slope angle of the piecewise-linear profile at ``x``."""
    n = xb.shape[0]
    if n == 0 or x < xb[0]:
        return hb[0] if n > 0 else 0.0, 0.0
    i = n - 1
    while x < xb[i]:
        i -= 1
    return hb[i] + math.tan(sb[i]) * (x - xb[i]), sb[i]


@njit(cache=True)
def _leg_point(q, qd, ih, ik, d1, d2, J, jd):
    """Point at ``hip + d1*u(a1) + d2*u(a2)`` with ``u(a) = (sin a, -cos a)``."""
    a1 = q[ih] - q[2]
    a2 = q[ih] + q[ik] - q[2]
    w1 = qd[ih] - qd[2]
    w2 = qd[ih] + qd[ik] - qd[2]
    s1, c1 = math.sin(a1), math.cos(a1)
    s2, c2 = math.sin(a2), math.cos(a2)
    for k in range(NQ):
        J[0, k] = 0.0
        J[1, k] = 0.0
    J[0, 0] = 1.0
    J[1, 1] = 1.0
    J[0, 2] = -d1 * c1 - d2 * c2
    J[1, 2] = -d1 * s1 - d2 * s2
    J[0, ih] = d1 * c1 + d2 * c2
    J[1, ih] = d1 * s1 + d2 * s2
    J[0, ik] = d2 * c2
    J[1, ik] = d2 * s2
    jd[0] = -d1 * s1 * w1 * w1 - d2 * s2 * w2 * w2
    jd[1] = d1 * c1 * w1 * w1 + d2 * c2 * w2 * w2
    return q[0] + d1 * s1 + d2 * s2, q[1] - d1 * c1 - d2 * c2


@njit(cache=True)
def _torso_point(q, qd, d, J, jd):
    s, c = math.sin(q[2]), math.cos(q[2])
    for k in range(NQ):
        J[0, k] = 0.0
        J[1, k] = 0.0
    J[0, 0] = 1.0
    J[1, 1] = 1.0
    J[0, 2] = d * c
    J[1, 2] = -d * s
    w2 = qd[2] * qd[2]
    jd[0] = -d * s * w2
    jd[1] = -d * c * w2
    return q[0] + d * s, q[1] + d * c


@njit(cache=True)
def _add_body(Mm, rhs, J, jd, m, g):
    for a in range(NQ):
        ja0, ja1 = J[0, a], J[1, a]
        if ja0 == 0.0 and ja1 == 0.0:
            continue
        for b in range(NQ):
            Mm[a, b] += m * (ja0 * J[0, b] + ja1 * J[1, b])
        rhs[a] -= m * (ja0 * jd[0] + ja1 * (jd[1] + g))


@njit(cache=True)
def _add_force(rhs, J, fx, fz):
    for a in range(NQ):
        rhs[a] += J[0, a] * fx + J[1, a] * fz


@njit(cache=True)
def _add_rot(Mm, i_link, ih, ik, with_knee):
    # Jw = -e_pitch + e_hip (+ e_knee)
    idx = (2, ih, ik)
    sg = (-1.0, 1.0, 1.0)
    n = 3 if with_knee else 2
    for a in range(n):
        for b in range(n):
            Mm[idx[a], idx[b]] += i_link * sg[a] * sg[b]


@njit(cache=True)
def _solve_spd(A, b, x):
    """In-place Cholesky solve of ``A x = b`` (A is overwritten)."""
    n = A.shape[0]
    for j in range(n):
        s = A[j, j]
        for k in range(j):
            s -= A[j, k] * A[j, k]
        if s <= 0.0:
            return False
        d = math.sqrt(s)
        A[j, j] = d
        for i in range(j + 1, n):
            s = A[i, j]
            for k in range(j):
                s -= A[i, k] * A[j, k]
            A[i, j] = s / d
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= A[i, k] * x[k]
        x[i] = s / A[i, i]
    for i in range(n - 1, -1, -1):
        s = x[i]
        for k in range(i + 1, n):
            s -= A[k, i] * x[k]
        x[i] = s / A[i, i]
    return True


@njit(cache=True)
def foot_positions(q, P):
    out = np.empty((2, 2))
    for leg in range(2):
        ih, ik = 3 + 2 * leg, 4 + 2 * leg
        a1 = q[ih] - q[2]
        a2 = q[ih] + q[ik] - q[2]
        out[leg, 0] = q[0] + P[P_L1] * math.sin(a1) + P[P_L2] * math.sin(a2)
        out[leg, 1] = q[1] - P[P_L1] * math.cos(a1) - P[P_L2] * math.cos(a2)
    return out


@njit(cache=True)
def com_state(q, qd, P):
    """Whole-body COM position and velocity ``(x, z, vx, vz)``."""
    J = np.zeros((2, NQ))
    jd = np.zeros(2)
    mt = P[P_MT] + 2.0 * (P[P_MTH] + P[P_MSH])
    px, pz = _torso_point(q, qd, P[P_CT], J, jd)
    cx, cz = P[P_MT] * px, P[P_MT] * pz
    vx, vz = 0.0, 0.0
    for k in range(NQ):
        vx += P[P_MT] * J[0, k] * qd[k]
        vz += P[P_MT] * J[1, k] * qd[k]
    for leg in range(2):
        ih, ik = 3 + 2 * leg, 4 + 2 * leg
        for sub in range(2):
            if sub == 0:
                m = P[P_MTH]
                px, pz = _leg_point(q, qd, ih, ik, P[P_CTH], 0.0, J, jd)
            else:
                m = P[P_MSH]
                px, pz = _leg_point(q, qd, ih, ik, P[P_L1], P[P_CSH], J, jd)
            cx += m * px
            cz += m * pz
            for k in range(NQ):
                vx += m * J[0, k] * qd[k]
                vz += m * J[1, k] * qd[k]
    return cx / mt, cz / mt, vx / mt, vz / mt


@njit(cache=True)
def mechanical_energy(q, qd, P):
    J = np.zeros((2, NQ))
    jd = np.zeros(2)
    g = P[P_G]
    e = 0.0
    px, pz = _torso_point(q, qd, P[P_CT], J, jd)
    vx, vz = J[0] @ qd, J[1] @ qd
    e += 0.5 * P[P_MT] * (vx * vx + vz * vz) + 0.5 * P[P_IT] * qd[2] ** 2 + P[P_MT] * g * pz
    for leg in range(2):
        ih, ik = 3 + 2 * leg, 4 + 2 * leg
        px, pz = _leg_point(q, qd, ih, ik, P[P_CTH], 0.0, J, jd)
        vx, vz = J[0] @ qd, J[1] @ qd
        w = qd[ih] - qd[2]
        e += 0.5 * P[P_MTH] * (vx * vx + vz * vz) + 0.5 * P[P_ITH] * w * w + P[P_MTH] * g * pz
        px, pz = _leg_point(q, qd, ih, ik, P[P_L1], P[P_CSH], J, jd)
        vx, vz = J[0] @ qd, J[1] @ qd
        w = qd[ih] + qd[ik] - qd[2]
        e += 0.5 * P[P_MSH] * (vx * vx + vz * vz) + 0.5 * P[P_ISH] * w * w + P[P_MSH] * g * pz
    return e


@njit(cache=True)
def physics_step(q, qd, tau, fext, P, C, xb, hb, sb, anchor, contact, dt,
                 Mm, rhs, qdd, J, jd, fcontact):
    """Advance ``q, qd`` in place by one step.

    ``C = [k_n, c_n, mu, k_t, c_t]``.  ``anchor``/``contact`` hold the per-foot
    stick-slip state and are updated in place.  ``fcontact[leg] = (f_n, f_t)``
    receives the contact forces applied during this step.  Returns False on
    numerical failure.
    """
    g = P[P_G]
    for a in range(NQ):
        rhs[a] = 0.0
        for b in range(NQ):
            Mm[a, b] = 0.0
    # joint torques act directly on their coordinates
    for j in range(4):
        rhs[3 + j] += tau[j]

    _torso_point(q, qd, P[P_CT], J, jd)
    _add_body(Mm, rhs, J, jd, P[P_MT], g)
    _add_force(rhs, J, fext, 0.0)
    Mm[2, 2] += P[P_IT]

    for leg in range(2):
        ih, ik = 3 + 2 * leg, 4 + 2 * leg
        _leg_point(q, qd, ih, ik, P[P_CTH], 0.0, J, jd)
        _add_body(Mm, rhs, J, jd, P[P_MTH], g)
        _add_rot(Mm, P[P_ITH], ih, ik, False)
        _leg_point(q, qd, ih, ik, P[P_L1], P[P_CSH], J, jd)
        _add_body(Mm, rhs, J, jd, P[P_MSH], g)
        _add_rot(Mm, P[P_ISH], ih, ik, True)

        # foot contact
        px, pz = _leg_point(q, qd, ih, ik, P[P_L1], P[P_L2], J, jd)
        h, s = terrain_query(px, xb, hb, sb)
        cs, sn = math.cos(s), math.sin(s)
        pen = (h - pz) * cs
        fcontact[leg, 0] = 0.0
        fcontact[leg, 1] = 0.0
        if pen > 0.0:
            vx = 0.0
            vz = 0.0
            for k in range(NQ):
                vx += J[0, k] * qd[k]
                vz += J[1, k] * qd[k]
            # n = (-sin s, cos s), t = (cos s, sin s)
            vn = -sn * vx + cs * vz
            vt = cs * vx + sn * vz
            fn = C[0] * pen - C[1] * vn
            if fn < 0.0:
                fn = 0.0
            if not contact[leg]:
                anchor[leg, 0] = px
                anchor[leg, 1] = pz
                contact[leg] = True
            disp = (px - anchor[leg, 0]) * cs + (pz - anchor[leg, 1]) * sn
            ft = -C[3] * disp - C[4] * vt
            fmax = C[2] * fn
            if abs(ft) > fmax:
                ft = fmax if ft > 0.0 else -fmax
                # slide the anchor so the spring alone would produce the clamped force
                new_disp = -(ft + C[4] * vt) / C[3]
                anchor[leg, 0] = px - new_disp * cs
                anchor[leg, 1] = pz - new_disp * sn
            fx = -sn * fn + cs * ft
            fz = cs * fn + sn * ft
            _add_force(rhs, J, fx, fz)
            fcontact[leg, 0] = fn
            fcontact[leg, 1] = ft
        else:
            contact[leg] = False

    if not _solve_spd(Mm, rhs, qdd):
        return False
    for k in range(NQ):
        qd[k] += dt * qdd[k]
        q[k] += dt * qd[k]
        if not math.isfinite(q[k]) or not math.isfinite(qd[k]):
            return False
    return True


@njit(cache=True)
def _leg_targets(zeta, step, sx, sz, tilt, G, R, out, leg):
    x, z = ellipse_point(zeta, step, G[1], G[2])
    x = sx + x
    z = sz + z
    if tilt != 0.0:
        # lay the curve along the support plane: front end up on an incline
        c, s = math.cos(tilt), math.sin(tilt)
        x, z = c * x - s * z, s * x + c * z
    x, z = clip_to_reach(x, z, R[0], R[1])
    hip, knee = ik_xz(x, z, R[2], R[3])
    out[2 * leg] = min(max(hip, R[4]), R[5])
    out[2 * leg + 1] = min(max(knee, R[6]), R[7])


@njit(cache=True)
def _gauss(w, x):
    return math.exp(-w * x * x)


@njit(cache=True)
def rollout_kernel(q, qd, phase0, P, G, R, K, C, xb, hb, sb,
                   Mpol, bpol, clip_lo, clip_hi, obs_idx, leg_idx, zero_idx,
                   W, T, pert, dt, substeps, n_steps, touchdown_dt, log):
    """Run one episode in place on ``q, qd``.

    G = [period, hip_height, swing_height, phase_offset, support_tilt (0 or 1)]
    R = [r_min, r_max, l1, l2, hip_lo, hip_hi, knee_lo, knee_hi]
    K = [kp, kd, torque_limit]
    W = [w1..w5, W_disp, v_nominal, com_height]
    T = [height_threshold, pitch_threshold, qd_max]
    pert rows = (t_start, duration, force_x)
    leg_idx[leg] = action indices of (step, shift_x, shift_z)
    zero_idx = action indices forced to zero (planar steering / y-shift)

    Returns (return, steps, distance, reason, alpha, phase, stats) where
    stats = [friction violations, min foot clearance, max penetration,
    max |f_t|/f_n, min f_n, touchdowns].
    """
    n_obs = Mpol.shape[1]
    n_act = Mpol.shape[0]
    Mm = np.zeros((NQ, NQ))
    rhs = np.zeros(NQ)
    qdd = np.zeros(NQ)
    J = np.zeros((2, NQ))
    jd = np.zeros(2)
    fc = np.zeros((2, 2))
    anchor = np.zeros((2, 2))
    contact = np.zeros(2, dtype=np.bool_)
    airtime = np.zeros(2)
    tau = np.zeros(4)
    targets = np.zeros(4)
    full = np.zeros(8)
    obs = np.zeros(n_obs)
    act = np.zeros(n_act)
    stats = np.zeros(6)
    stats[1] = 1e9
    stats[4] = 1e9

    # initial contact state: feet touching the surface count as stance
    feet = foot_positions(q, P)
    for leg in range(2):
        h, s = terrain_query(feet[leg, 0], xb, hb, sb)
        if (feet[leg, 1] - h) * math.cos(s) < 1e-3:
            contact[leg] = True
            anchor[leg, 0] = feet[leg, 0]
            anchor[leg, 1] = feet[leg, 1]

    dt_c = dt * substeps
    zeta = phase0
    alpha = 0.0
    t = 0.0
    total = 0.0
    cx0, cz0, vx0, vz0 = com_state(q, qd, P)
    cx_prev = cx0
    reason = ALIVE
    steps = 0
    logging = log.shape[0] > 0
    n_pert = pert.shape[0]

    for step in range(n_steps):
        # observation
        full[1] = q[2]
        full[4] = qd[2]
        full[7] = alpha
        for i in range(n_obs):
            obs[i] = full[obs_idx[i]]
        for a in range(n_act):
            v = bpol[a]
            for i in range(n_obs):
                v += Mpol[a, i] * obs[i]
            act[a] = min(max(v, clip_lo[a]), clip_hi[a])
        for i in range(zero_idx.shape[0]):
            act[zero_idx[i]] = 0.0

        zl = zeta
        zr = wrap_phase(zeta + G[3])
        tilt = alpha * G[4]
        _leg_targets(zl, act[leg_idx[0, 0]], act[leg_idx[0, 1]], act[leg_idx[0, 2]], tilt, G, R, targets, 0)
        _leg_targets(zr, act[leg_idx[1, 0]], act[leg_idx[1, 1]], act[leg_idx[1, 2]], tilt, G, R, targets, 1)

        f_applied = 0.0
        ok = True
        for sub in range(substeps):
            ts = t + sub * dt
            fext = 0.0
            for p in range(n_pert):
                if pert[p, 0] <= ts < pert[p, 0] + pert[p, 1]:
                    fext += pert[p, 2]
            if sub == 0:
                f_applied = fext
            for j in range(4):
                u = K[0] * (targets[j] - q[3 + j]) - K[1] * qd[3 + j]
                tau[j] = min(max(u, -K[2]), K[2])
            was0, was1 = contact[0], contact[1]
            ok = physics_step(q, qd, tau, fext, P, C, xb, hb, sb, anchor, contact, dt,
                              Mm, rhs, qdd, J, jd, fc)
            if not ok:
                break
            for leg in range(2):
                fn, ft = fc[leg, 0], fc[leg, 1]
                if fn < stats[4] and contact[leg]:
                    stats[4] = fn
                if abs(ft) > C[2] * fn + 1e-9:
                    stats[0] += 1
                if fn > 0.0 and abs(ft) / fn > stats[3]:
                    stats[3] = abs(ft) / fn
            feet = foot_positions(q, P)
            for leg in range(2):
                h, s = terrain_query(feet[leg, 0], xb, hb, sb)
                clear = (feet[leg, 1] - h) * math.cos(s)
                if clear < stats[1]:
                    stats[1] = clear
                if -clear > stats[2]:
                    stats[2] = -clear
                if contact[leg]:
                    was = was0 if leg == 0 else was1
                    if not was and airtime[leg] >= touchdown_dt:
                        stats[5] += 1
                        other = 1 - leg
                        if contact[other]:
                            # both contact points via leg FK, rotated into a gravity-aligned hip frame
                            c, s_ = math.cos(q[2]), math.sin(q[2])
                            xa, za = fk_xz(q[3 + 2 * other], q[4 + 2 * other], R[2], R[3])
                            xc, zc = fk_xz(q[3 + 2 * leg], q[4 + 2 * leg], R[2], R[3])
                            alpha = slope_between(c * xa + s_ * za, -s_ * xa + c * za,
                                                  c * xc + s_ * zc, -s_ * xc + c * zc, alpha)
                    airtime[leg] = 0.0
                else:
                    airtime[leg] += dt
            for k in range(NQ):
                if abs(qd[k]) > T[2]:
                    ok = False
            if not ok:
                break

        t += dt_c
        steps = step + 1
        zeta = wrap_phase(zeta + dt_c / G[0])
        if not ok:
            reason = DIVERGED
            break

        cx, cz, vx, vz = com_state(q, qd, P)
        hc, sc = terrain_query(cx, xb, hb, sb)
        r = (2.0 + _gauss(W[1], q[2]) + _gauss(W[3], cz - hc - W[7])
             + _gauss(W[4], vx - W[6]) + W[5] * (cx - cx_prev))
        cx_prev = cx
        total += r

        if logging:
            tx = q[0] + P[P_CT] * math.sin(q[2])
            tz = q[1] + P[P_CT] * math.cos(q[2])
            row = log[step]
            row[0] = t
            row[1] = tx
            row[2] = tz
            row[3] = math.degrees(q[2])
            row[4] = qd[2]
            row[5] = zeta
            row[6] = r
            row[7] = cx - cx0
            row[8] = 1.0 if contact[0] else 0.0
            row[9] = 1.0 if contact[1] else 0.0
            row[10] = act[leg_idx[0, 0]]
            row[11] = act[leg_idx[0, 1]]
            row[12] = act[leg_idx[0, 2]]
            row[13] = math.degrees(alpha)
            row[14] = f_applied

        hh, sh = terrain_query(q[0], xb, hb, sb)
        if q[1] - hh < T[0]:
            reason = FELL_LOW
            break
        if abs(q[2]) > T[1]:
            reason = TOPPLED
            break
    if reason == ALIVE:
        reason = TIME_UP

    cx, cz, vx, vz = com_state(q, qd, P)
    return total, steps, cx - cx0, reason, alpha, zeta, stats
