"""Pure-Python kernels; reference semantics for the compiled ``_ckernels``.

Keep the arithmetic order in sync with ``_ckernels.pyx`` so both backends
produce the same floating-point results.
"""

from collections import deque
from math import cos, exp, pi, sin, sqrt, tanh

import numpy as np

BACKEND = "python"


def reach_worklist(pred_ptr, pred_pairs, post_count, m, goal, allowed):
    """Least fixed point of ``Z -> goal | (CPre(Z) & allowed)`` by FIFO worklist.

    Returns the entry level of each cell (``-1`` when never winning).
    """
    n_cells = len(goal)
    level = np.full(n_cells, -1, dtype=np.int64)
    cnt = np.array(post_count, dtype=np.int64)
    pred_ptr = pred_ptr.tolist()
    pred_pairs = pred_pairs.tolist()
    allowed = allowed.tolist()
    lev = level.tolist()
    cnt_l = cnt.tolist()
    queue = deque()
    for c in np.flatnonzero(goal).tolist():
        lev[c] = 0
        queue.append(c)
    while queue:
        s = queue.popleft()
        nxt = lev[s] + 1
        for k in range(pred_ptr[s], pred_ptr[s + 1]):
            p = pred_pairs[k]
            cnt_l[p] -= 1
            if cnt_l[p] == 0:
                c = p // m
                if lev[c] < 0 and allowed[c]:
                    lev[c] = nxt
                    queue.append(c)
    return np.asarray(lev, dtype=np.int64)


def safety_worklist(pred_ptr, pred_pairs, good_pair, m, safe):
    """Greatest fixed point of ``Z -> safe & CPre(Z)``.

    ``good_pair`` marks pairs with a non-empty Post inside ``safe``; it is
    updated in place to the surviving invariance-preserving pairs.
    Returns the membership mask of the fixed point.
    """
    n_cells = len(safe)
    good = good_pair.tolist()
    gcount = np.add.reduceat(good_pair.astype(np.int64), np.arange(0, n_cells * m, m)).tolist() if n_cells else []
    inz = safe.tolist()
    pred_ptr = pred_ptr.tolist()
    pred_pairs = pred_pairs.tolist()
    queue = deque()
    for c in range(n_cells):
        if inz[c] and gcount[c] == 0:
            inz[c] = False
            queue.append(c)
    while queue:
        s = queue.popleft()
        for k in range(pred_ptr[s], pred_ptr[s + 1]):
            p = pred_pairs[k]
            if good[p]:
                good[p] = False
                c = p // m
                gcount[c] -= 1
                if inz[c] and gcount[c] == 0:
                    inz[c] = False
                    queue.append(c)
    good_pair[:] = np.asarray(good, dtype=bool)
    return np.asarray(inz, dtype=bool)


def _psi(s, a, scale):
    t = tanh(a * s)
    out = t * t * t * scale
    if scale != 1.0:
        if out > 1.0:
            out = 1.0
        elif out < -1.0:
            out = -1.0
    return out


def _accel(plant_id, pp, n, x, v, tau, d, out):
    if plant_id == 0:
        m, l, g = pp[0], pp[1], pp[2]
        out[0] = 3.0 / (m * l * l) * (tau[0] + d[0]) - 1.5 * g / l * sin(x[0])
    elif plant_id == 1:
        m, l, g = pp[0], pp[1], pp[2]
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


def _control(n, x, v, xi, s, lam, vbar, taubar, p, q, mu, a, scale, tau, ev, rho):
    r2 = 0.0
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


def _disturbance(kind, n, t, j, amp, freq, phase, dvals, out):
    if kind == 1:
        for i in range(n):
            out[i] = amp[i] * sin(2.0 * pi * freq[i] * t + phase[i])
    elif kind == 2:
        for i in range(n):
            out[i] = dvals[j, i]
    else:
        for i in range(n):
            out[i] = 0.0


def integrate_segment(plant_id, plant_params, x0, v0, xi0, u, step0, clock0, dt, steps,
                      lam, vbar, taubar, p, q, mu, psi_a, psi_exact,
                      dist_kind, amp, freq, phase, dvals):
    """RK4 closed loop over ``steps`` fixed steps with the VCZ center moving at ``u``.

    The torque is re-evaluated at every RK4 stage.  Time of step ``j`` is
    ``(step0 + j) * dt``; the funnel runs on ``t - clock0``.  Returns arrays
    of shape ``(steps, n)``: post-step ``x``, ``v``, and the control ``tau``,
    ``e_v``, ``rho_v`` evaluated at each post-step state.
    """
    n = len(x0)
    pp = [float(c) for c in plant_params]
    vbar = [float(c) for c in vbar]
    taubar = [float(c) for c in taubar]
    p = [float(c) for c in p]
    q = [float(c) for c in q]
    mu = [float(c) for c in mu]
    amp = [float(c) for c in amp]
    freq = [float(c) for c in freq]
    phase = [float(c) for c in phase]
    uu = [float(c) for c in u]
    xi0 = [float(c) for c in xi0]
    scale = 1.0 / tanh(psi_a) ** 3 if psi_exact else 1.0
    t_seg = step0 * dt

    X = np.empty((steps, n))
    V = np.empty((steps, n))
    TAU = np.empty((steps, n))
    EV = np.empty((steps, n))
    RHO = np.empty((steps, n))

    x = [float(c) for c in x0]
    v = [float(c) for c in v0]
    tau = [0.0] * n
    ev = [0.0] * n
    rho = [0.0] * n
    d = [0.0] * n
    acc = [0.0] * n
    xi = [0.0] * n
    xs = [0.0] * n
    vs = [0.0] * n
    kx = [[0.0] * n for _ in range(4)]
    kv = [[0.0] * n for _ in range(4)]
    coef = (0.0, 0.5, 0.5, 1.0)

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
                kxp = kx[st - 1]
                kvp = kv[st - 1]
                for i in range(n):
                    xs[i] = x[i] + c * dt * kxp[i]
                    vs[i] = v[i] + c * dt * kvp[i]
            for i in range(n):
                xi[i] = xi0[i] + uu[i] * (ts - t_seg)
            _control(n, xs, vs, xi, ts - clock0, lam, vbar, taubar, p, q, mu, psi_a, scale, tau, ev, rho)
            _disturbance(dist_kind, n, ts, j, amp, freq, phase, dvals, d)
            _accel(plant_id, pp, n, xs, vs, tau, d, acc)
            kxs = kx[st]
            kvs = kv[st]
            for i in range(n):
                kxs[i] = vs[i]
                kvs[i] = acc[i]
        for i in range(n):
            x[i] = x[i] + dt / 6.0 * (kx[0][i] + 2.0 * kx[1][i] + 2.0 * kx[2][i] + kx[3][i])
            v[i] = v[i] + dt / 6.0 * (kv[0][i] + 2.0 * kv[1][i] + 2.0 * kv[2][i] + kv[3][i])
        t1 = (step0 + j + 1) * dt
        for i in range(n):
            xi[i] = xi0[i] + uu[i] * (t1 - t_seg)
        _control(n, x, v, xi, t1 - clock0, lam, vbar, taubar, p, q, mu, psi_a, scale, tau, ev, rho)
        for i in range(n):
            X[j, i] = x[i]
            V[j, i] = v[i]
            TAU[j, i] = tau[i]
            EV[j, i] = ev[i]
            RHO[j, i] = rho[i]
    return X, V, TAU, EV, RHO
