# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: fixed-point worklists and the closed-loop RK4 segment.

Semantics (and arithmetic order) mirror ``_kernels_py``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, exp, sin, sqrt, tanh, M_PI

cnp.import_array()

BACKEND = "cython"


def reach_worklist(const cnp.int64_t[::1] pred_ptr, const cnp.int64_t[::1] pred_pairs,
                   post_count, Py_ssize_t m, goal, allowed):
    cdef Py_ssize_t n_cells = len(goal)
    cdef cnp.int64_t[::1] cnt = np.array(post_count, dtype=np.int64)
    cdef const cnp.uint8_t[::1] allow = np.ascontiguousarray(allowed, dtype=np.uint8)
    cdef const cnp.uint8_t[::1] g = np.ascontiguousarray(goal, dtype=np.uint8)
    level_arr = np.full(n_cells, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] lev = level_arr
    cdef cnp.int64_t[::1] queue = np.empty(n_cells, dtype=np.int64)
    cdef Py_ssize_t head = 0, tail = 0, c, s, k, p
    cdef cnp.int64_t nxt
    for c in range(n_cells):
        if g[c]:
            lev[c] = 0
            queue[tail] = c
            tail += 1
    while head < tail:
        s = queue[head]
        head += 1
        nxt = lev[s] + 1
        for k in range(pred_ptr[s], pred_ptr[s + 1]):
            p = pred_pairs[k]
            cnt[p] -= 1
            if cnt[p] == 0:
                c = p // m
                if lev[c] < 0 and allow[c]:
                    lev[c] = nxt
                    queue[tail] = c
                    tail += 1
    return level_arr


def safety_worklist(const cnp.int64_t[::1] pred_ptr, const cnp.int64_t[::1] pred_pairs,
                    good_pair, Py_ssize_t m, safe):
    cdef Py_ssize_t n_cells = len(safe)
    good_u8 = np.ascontiguousarray(good_pair, dtype=np.uint8)
    cdef cnp.uint8_t[::1] good = good_u8
    inz_arr = np.ascontiguousarray(safe, dtype=np.uint8).copy()
    cdef cnp.uint8_t[::1] inz = inz_arr
    cdef cnp.int64_t[::1] gcount = np.zeros(n_cells, dtype=np.int64)
    cdef cnp.int64_t[::1] queue = np.empty(n_cells, dtype=np.int64)
    cdef Py_ssize_t head = 0, tail = 0, c, s, k, p, j
    for c in range(n_cells):
        for j in range(m):
            gcount[c] += good[c * m + j]
    for c in range(n_cells):
        if inz[c] and gcount[c] == 0:
            inz[c] = 0
            queue[tail] = c
            tail += 1
    while head < tail:
        s = queue[head]
        head += 1
        for k in range(pred_ptr[s], pred_ptr[s + 1]):
            p = pred_pairs[k]
            if good[p]:
                good[p] = 0
                c = p // m
                gcount[c] -= 1
                if inz[c] and gcount[c] == 0:
                    inz[c] = 0
                    queue[tail] = c
                    tail += 1
    good_pair[:] = good_u8.astype(bool)
    return inz_arr.astype(bool)


cdef inline double _psi(double s, double a, double scale) nogil:
    cdef double t = tanh(a * s)
    cdef double out = t * t * t * scale
    if scale != 1.0:
        if out > 1.0:
            out = 1.0
        elif out < -1.0:
            out = -1.0
    return out


cdef void _accel(int plant_id, double* pp, Py_ssize_t n, double* x, double* v,
                 double* tau, double* d, double* out) nogil:
    cdef double m, l, g, c1, c2, s2, c12, ml2, m00, m01, m10, m11, w1, w2
    cdef double cor0, cor1, g0, g1, r0, r1, det
    cdef Py_ssize_t i
    if plant_id == 0:
        m = pp[0]
        l = pp[1]
        g = pp[2]
        out[0] = 3.0 / (m * l * l) * (tau[0] + d[0]) - 1.5 * g / l * sin(x[0])
    elif plant_id == 1:
        m = pp[0]
        l = pp[1]
        g = pp[2]
        c1 = cos(x[0])
        c2 = cos(x[1])
        s2 = sin(x[1])
        c12 = cos(x[0] + x[1])
        ml2 = m * l * l
        m00 = ml2 * (5.0 / 3.0 + c2) + pp[3]
        m01 = ml2 * (1.0 / 3.0 + 0.5 * c2)
        m10 = ml2 * (0.5 * c2)
        m11 = ml2 * (1.0 / 3.0) + pp[3]
        w1 = v[0]
        w2 = v[1]
        cor0 = ml2 * s2 * (-0.5 * w2 * w2 - w1 * w2)
        cor1 = ml2 * s2 * (0.5 * w2 * w2)
        g0 = m * g * l * (1.5 * c1 + 0.5 * c12)
        g1 = m * g * l * (0.5 * c12)
        r0 = tau[0] + d[0] - cor0 - g0
        r1 = tau[1] + d[1] - cor1 - g1
        det = m00 * m11 - m01 * m10
        out[0] = (m11 * r0 - m01 * r1) / det
        out[1] = (m00 * r1 - m10 * r0) / det
    else:
        for i in range(n):
            out[i] = tau[i] + d[i]


cdef void _control(Py_ssize_t n, double* x, double* v, double* xi, double s, double lam,
                   double* vbar, double* taubar, double* p, double* q, double* mu,
                   double a, double scale, double* tau, double* ev, double* rho) nogil:
    cdef double r2 = 0.0, diff, r, mag, vr
    cdef Py_ssize_t i
    for i in range(n):
        diff = x[i] - xi[i]
        r2 += diff * diff
    r = sqrt(r2)
    if r > 0.0:
        mag = _psi(r / lam, a, scale) / r
    else:
        mag = 0.0
    for i in range(n):
        vr = -vbar[i] * mag * (x[i] - xi[i])
        rho[i] = exp(-mu[i] * s) * (p[i] - q[i]) + q[i]
        ev[i] = v[i] - vr
        tau[i] = -taubar[i] * _psi(ev[i] / rho[i], a, scale)


def integrate_segment(int plant_id, plant_params, x0, v0, xi0, u, long step0, double clock0,
                      double dt, Py_ssize_t steps, double lam, vbar, taubar, p, q, mu,
                      double psi_a, int psi_exact, int dist_kind, amp, freq, phase, dvals):
    cdef Py_ssize_t n = len(x0)
    cdef double[::1] pp = np.ascontiguousarray(plant_params, dtype=np.float64)
    cdef double[::1] vb = np.ascontiguousarray(vbar, dtype=np.float64)
    cdef double[::1] tb = np.ascontiguousarray(taubar, dtype=np.float64)
    cdef double[::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef double[::1] muv = np.ascontiguousarray(mu, dtype=np.float64)
    cdef double[::1] am = np.ascontiguousarray(amp, dtype=np.float64)
    cdef double[::1] fr = np.ascontiguousarray(freq, dtype=np.float64)
    cdef double[::1] ph = np.ascontiguousarray(phase, dtype=np.float64)
    cdef double[::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[::1] xi0v = np.ascontiguousarray(xi0, dtype=np.float64)
    cdef double[:, ::1] dv
    if dist_kind == 2:
        dv = np.ascontiguousarray(dvals, dtype=np.float64)
    cdef double scale = 1.0
    if psi_exact:
        scale = 1.0 / tanh(psi_a) ** 3
    cdef double t_seg = step0 * dt

    X_arr = np.empty((steps, n))
    V_arr = np.empty((steps, n))
    T_arr = np.empty((steps, n))
    E_arr = np.empty((steps, n))
    R_arr = np.empty((steps, n))
    cdef double[:, ::1] X = X_arr
    cdef double[:, ::1] V = V_arr
    cdef double[:, ::1] TAU = T_arr
    cdef double[:, ::1] EV = E_arr
    cdef double[:, ::1] RHO = R_arr

    work_arr = np.zeros(13 * n)
    cdef double[::1] work = work_arr
    cdef double* x = &work[0]
    cdef double* v = &work[n]
    cdef double* tau = &work[2 * n]
    cdef double* ev = &work[3 * n]
    cdef double* rho = &work[4 * n]
    cdef double* d = &work[5 * n]
    cdef double* acc = &work[6 * n]
    cdef double* xi = &work[7 * n]
    cdef double* xs = &work[8 * n]
    cdef double* vs = &work[9 * n]
    kx_arr = np.zeros((4, n))
    kv_arr = np.zeros((4, n))
    cdef double[:, ::1] kx = kx_arr
    cdef double[:, ::1] kv = kv_arr
    cdef double coef[4]
    coef[0] = 0.0
    coef[1] = 0.5
    coef[2] = 0.5
    coef[3] = 1.0
    cdef Py_ssize_t i, j, st
    cdef double t, ts, c, t1
    for i in range(n):
        x[i] = float(x0[i])
        v[i] = float(v0[i])

    for j in range(steps):
        t = (step0 + j) * dt
        for st in range(4):
            c = coef[st]
            ts = t + c * dt
            if st == 0:
                for i in range(n):
                    xs[i] = x[i]
                    vs[i] = v[i]
            else:
                for i in range(n):
                    xs[i] = x[i] + c * dt * kx[st - 1, i]
                    vs[i] = v[i] + c * dt * kv[st - 1, i]
            for i in range(n):
                xi[i] = xi0v[i] + uu[i] * (ts - t_seg)
            _control(n, xs, vs, xi, ts - clock0, lam, &vb[0], &tb[0], &pv[0], &qv[0], &muv[0],
                     psi_a, scale, tau, ev, rho)
            if dist_kind == 1:
                for i in range(n):
                    d[i] = am[i] * sin(2.0 * M_PI * fr[i] * ts + ph[i])
            elif dist_kind == 2:
                for i in range(n):
                    d[i] = dv[j, i]
            else:
                for i in range(n):
                    d[i] = 0.0
            _accel(plant_id, &pp[0], n, xs, vs, tau, d, acc)
            for i in range(n):
                kx[st, i] = vs[i]
                kv[st, i] = acc[i]
        for i in range(n):
            x[i] = x[i] + dt / 6.0 * (kx[0, i] + 2.0 * kx[1, i] + 2.0 * kx[2, i] + kx[3, i])
            v[i] = v[i] + dt / 6.0 * (kv[0, i] + 2.0 * kv[1, i] + 2.0 * kv[2, i] + kv[3, i])
        t1 = (step0 + j + 1) * dt
        for i in range(n):
            xi[i] = xi0v[i] + uu[i] * (t1 - t_seg)
        _control(n, x, v, xi, t1 - clock0, lam, &vb[0], &tb[0], &pv[0], &qv[0], &muv[0],
                 psi_a, scale, tau, ev, rho)
        for i in range(n):
            X[j, i] = x[i]
            V[j, i] = v[i]
            TAU[j, i] = tau[i]
            EV[j, i] = ev[i]
            RHO[j, i] = rho[i]
    return X_arr, V_arr, T_arr, E_arr, R_arr
