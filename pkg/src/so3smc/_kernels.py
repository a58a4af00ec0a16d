"""Compiled stepping loops for the closed-loop simulators.

These mirror the numpy loops in :mod:`so3smc.sim` operation for operation;
the test suite checks the two engines against each other.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

EXPMAP = 0
RK4_PROJECT = 1


@njit(cache=True)
def _hat(w):
    X = np.zeros((3, 3))
    X[0, 1] = -w[2]
    X[0, 2] = w[1]
    X[1, 0] = w[2]
    X[1, 2] = -w[0]
    X[2, 0] = -w[1]
    X[2, 1] = w[0]
    return X


@njit(cache=True)
def _vee_pa(A):
    out = np.empty(3)
    out[0] = 0.5 * (A[2, 1] - A[1, 2])
    out[1] = 0.5 * (A[0, 2] - A[2, 0])
    out[2] = 0.5 * (A[1, 0] - A[0, 1])
    return out


@njit(cache=True)
def _cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit(cache=True)
def _exp(phi):
    angle = math.sqrt(phi[0] * phi[0] + phi[1] * phi[1] + phi[2] * phi[2])
    if angle == 0.0:
        return np.eye(3)
    K = _hat(phi / angle)
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


@njit(cache=True)
def _step_attitude(R, w, h, mode):
    if mode == EXPMAP:
        return R @ _exp(h * w)
    A = _hat(h * w)
    A2 = A @ A
    M = R @ (np.eye(3) + A + A2 / 2.0 + (A2 @ A) / 6.0 + (A2 @ A2) / 24.0)
    U, s, Vt = np.linalg.svd(M)
    return U @ Vt


@njit(cache=True)
def _dist(amp, freq, cos_mask, t):
    out = np.empty(3)
    for i in range(3):
        x = freq[i] * t
        out[i] = amp[i] * (math.cos(x) if cos_mask[i] else math.sin(x))
    return out


@njit(cache=True)
def _ref(offset, amp, freq, phase, t):
    return offset + amp * np.sin(freq * t + phase)


@njit(cache=True)
def _ref_dot(amp, freq, phase, t):
    return amp * freq * np.cos(freq * t + phase)


@njit(cache=True)
def _switch(s, gain, eps):
    n = math.sqrt(s[0] * s[0] + s[1] * s[1] + s[2] * s[2])
    if n > eps:
        return (-gain / n) * s
    if eps == 0.0:
        return np.zeros(3)
    return (-gain / eps) * s


@njit(cache=True)
def _euler(w, J, Ji, torque):
    return Ji @ (_cross(J @ w, w) + torque)


@njit(cache=True)
def _n_records(n, stride):
    return n // stride + 1 + (1 if n % stride != 0 else 0)


@njit(cache=True)
def _vnorm(x):
    return math.sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])


@njit(cache=True)
def so3_loop(
    R0, w0, Rd0,
    ref_offset, ref_amp, ref_freq, ref_phase,
    d_amp, d_freq, d_cos,
    J, Ji,
    c_w2, c_we, k0, eps,
    h, n, stride, mode,
    reach_tol, sustain,
):
    """Returns ``(rows, metrics, abort_step)``; ``metrics`` holds reach time
    (nan when not reached), min trace, final trace, final |w_e| and max |u|."""
    rows = np.empty((_n_records(n, stride), 22))
    R = R0.copy()
    w = w0.copy()
    Rd = Rd0.copy()
    min_tr = np.inf
    max_u = 0.0
    since = -1.0
    reach = np.nan
    final_we = 0.0
    tr = 0.0
    r = 0
    ref_moving = np.any(ref_amp != 0.0) or np.any(ref_offset != 0.0)
    for k in range(n + 1):
        t = k * h
        wd = _ref(ref_offset, ref_amp, ref_freq, ref_phase, t)
        wd_dot = _ref_dot(ref_amp, ref_freq, ref_phase, t)
        Re = Rd.T @ R
        ReT = Re.T
        we = w - ReT @ wd
        s = we + _vee_pa(Re)
        gain = c_w2 * (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]) + c_we * _vnorm(we) + k0
        v = _switch(s, gain, eps)
        u = -J @ (ReT @ (_cross(Re @ we, wd) - wd_dot)) + v

        tr = Re[0, 0] + Re[1, 1] + Re[2, 2]
        min_tr = min(min_tr, tr)
        max_u = max(max_u, _vnorm(u))
        s_norm = _vnorm(s)
        if np.isnan(reach):
            if s_norm <= reach_tol:
                if since < 0.0:
                    since = t
                if t - since >= sustain - 1e-9:
                    reach = since
            else:
                since = -1.0
        if k % stride == 0 or k == n:
            D = Re - np.eye(3)
            rows[r, 0] = t
            rows[r, 1:10] = R.ravel()
            rows[r, 10:13] = w
            rows[r, 13:16] = s
            rows[r, 16:19] = u
            rows[r, 19] = tr
            rows[r, 20] = 0.25 * np.sum(D * D)
            rows[r, 21] = 0.5 * (s @ (J @ s))
            r += 1
        if k == n:
            final_we = _vnorm(we)
            break

        d1 = _dist(d_amp, d_freq, d_cos, t)
        dm = _dist(d_amp, d_freq, d_cos, t + 0.5 * h)
        d2 = _dist(d_amp, d_freq, d_cos, t + h)
        k1 = _euler(w, J, Ji, u + d1)
        w2 = w + 0.5 * h * k1
        k2 = _euler(w2, J, Ji, u + dm)
        w3 = w + 0.5 * h * k2
        k3 = _euler(w3, J, Ji, u + dm)
        w4 = w + h * k3
        k4 = _euler(w4, J, Ji, u + d2)
        R = _step_attitude(R, (w + 2 * w2 + 2 * w3 + w4) / 6.0, h, mode)
        w = w + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(R))):
            return rows[:r], np.array([reach, min_tr, tr, final_we, max_u]), k + 1
        if ref_moving:
            wd_next = _ref(ref_offset, ref_amp, ref_freq, ref_phase, t + h)
            wd_mid = _ref(ref_offset, ref_amp, ref_freq, ref_phase, t + 0.5 * h)
            Rd = _step_attitude(Rd, (wd + 4 * wd_mid + wd_next) / 6.0, h, mode)
    return rows, np.array([reach, min_tr, tr, final_we, max_u]), -1


@njit(cache=True)
def _quat_rate(q, w):
    out = np.empty(4)
    out[0] = -0.5 * (q[1] * w[0] + q[2] * w[1] + q[3] * w[2])
    out[1:] = 0.5 * (q[0] * w + _cross(q[1:], w))
    return out


@njit(cache=True)
def _quat_to_rot(q):
    q0, q1, q2, q3 = q[0], q[1], q[2], q[3]
    R = np.empty((3, 3))
    R[0, 0] = 1 - 2 * (q2 * q2 + q3 * q3)
    R[0, 1] = 2 * (q1 * q2 - q0 * q3)
    R[0, 2] = 2 * (q1 * q3 + q0 * q2)
    R[1, 0] = 2 * (q1 * q2 + q0 * q3)
    R[1, 1] = 1 - 2 * (q1 * q1 + q3 * q3)
    R[1, 2] = 2 * (q2 * q3 - q0 * q1)
    R[2, 0] = 2 * (q1 * q3 - q0 * q2)
    R[2, 1] = 2 * (q2 * q3 + q0 * q1)
    R[2, 2] = 1 - 2 * (q1 * q1 + q2 * q2)
    return R


@njit(cache=True)
def quat_loop(q_init, w0, d_amp, d_freq, d_cos, J, Ji, k_q, eps, h, n, stride, reach_tol, sustain, drift_warn):
    """Returns ``(rows, quats, metrics, abort_step, max_drift)``."""
    n_rec = _n_records(n, stride)
    rows = np.empty((n_rec, 23))
    quats = np.empty((n_rec, 4))
    q = q_init / math.sqrt(q_init @ q_init)
    w = w0.copy()
    min_tr = np.inf
    max_u = 0.0
    since = -1.0
    reach = np.nan
    tr = 0.0
    r = 0
    max_drift = 0.0
    for k in range(n + 1):
        t = k * h
        s = q[1:] + w
        u = _switch(s, k_q, eps)
        R = _quat_to_rot(q)
        tr = R[0, 0] + R[1, 1] + R[2, 2]
        min_tr = min(min_tr, tr)
        max_u = max(max_u, _vnorm(u))
        s_norm = _vnorm(s)
        if np.isnan(reach):
            if s_norm <= reach_tol:
                if since < 0.0:
                    since = t
                if t - since >= sustain - 1e-9:
                    reach = since
            else:
                since = -1.0
        if k % stride == 0 or k == n:
            D = R - np.eye(3)
            rows[r, 0] = t
            rows[r, 1:10] = R.ravel()
            rows[r, 10:13] = w
            rows[r, 13:16] = s
            rows[r, 16:19] = u
            rows[r, 19] = tr
            rows[r, 20] = 0.25 * np.sum(D * D)
            rows[r, 21] = 0.5 * (s @ (J @ s))
            rows[r, 22] = q[0]
            quats[r] = q
            r += 1
        if k == n:
            break

        d1 = _dist(d_amp, d_freq, d_cos, t)
        dm = _dist(d_amp, d_freq, d_cos, t + 0.5 * h)
        d2 = _dist(d_amp, d_freq, d_cos, t + h)
        a1 = _quat_rate(q, w)
        b1 = _euler(w, J, Ji, u + d1)
        a2 = _quat_rate(q + 0.5 * h * a1, w + 0.5 * h * b1)
        b2 = _euler(w + 0.5 * h * b1, J, Ji, u + dm)
        a3 = _quat_rate(q + 0.5 * h * a2, w + 0.5 * h * b2)
        b3 = _euler(w + 0.5 * h * b2, J, Ji, u + dm)
        a4 = _quat_rate(q + h * a3, w + h * b3)
        b4 = _euler(w + h * b3, J, Ji, u + d2)
        q = q + (h / 6.0) * (a1 + 2 * a2 + 2 * a3 + a4)
        w = w + (h / 6.0) * (b1 + 2 * b2 + 2 * b3 + b4)
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(q))):
            return rows[:r], quats[:r], np.array([reach, min_tr, tr, _vnorm(w), max_u]), k + 1, max_drift
        nq = math.sqrt(q @ q)
        max_drift = max(max_drift, abs(nq - 1.0))
        q = q / nq
    return rows, quats, np.array([reach, min_tr, tr, _vnorm(w), max_u]), -1, max_drift
